"""Incremental iterative regularization for least squares.

Early-stopped incremental (cyclic per-point) gradient descent in linear and
kernel settings, with a priori and hold-out stopping rules, synthetic problem
generators with known ground truth, and a numerical verification harness for
the operator identities, norm/risk bounds and concentration inequalities the
method's analysis rests on.
"""

from .io import TOOL_VERSION as __version__
from .kernels import KernelSpec, parse_kernel
from .linear import IterState, epoch_update, run_iir
from .model import ContractViolation, DataSet, DiscreteDistribution, SourceProblem
from .stopping import StoppingRule, parse_rule, stopping_time
from .synth import SpectrumSpec, TrigProblem, make_source_problem, parse_preset

__all__ = [
    "__version__",
    "ContractViolation",
    "DataSet",
    "DiscreteDistribution",
    "SourceProblem",
    "IterState",
    "epoch_update",
    "run_iir",
    "KernelSpec",
    "parse_kernel",
    "StoppingRule",
    "parse_rule",
    "stopping_time",
    "TrigProblem",
    "SpectrumSpec",
    "make_source_problem",
    "parse_preset",
]
