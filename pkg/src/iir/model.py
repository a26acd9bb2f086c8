"""Data model: finite samples, exact discrete population oracles, risk functionals.

Everything here is immutable after construction and all operations are pure,
so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Width (in standard deviations) at which sampled output noise is clipped, so
# that |y| admits a finite almost-sure bound M as the analysis requires.
NOISE_CLIP_SDS = 5.0


class ContractViolation(ValueError):
    """Raised when an operation's preconditions are not met."""


def _as_matrix(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ContractViolation(f"{name} must be a 2-D array, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class DataSet:
    """A training sample (x_i, y_i), i = 1..n, with x_i in R^d and scalar y_i."""

    x: np.ndarray  # (n, d)
    y: np.ndarray  # (n,)
    task: str = "regression"  # "regression" or "classification"

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ContractViolation(
                f"x has {x.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if x.shape[0] < 1:
            raise ContractViolation("dataset must contain at least one point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ContractViolation("dataset contains NaN or Inf")
        if np.max(np.sum(x * x, axis=1)) <= 0.0:
            raise ContractViolation("all-zero inputs: kappa bound would be zero")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "DataSet":
        return DataSet(self.x[idx], self.y[idx], task=self.task)


def kappa_bound(data: DataSet) -> float:
    """max_i ||x_i||^2, the empirical bound on the squared input norm."""
    return float(np.max(np.sum(data.x * data.x, axis=1)))


def m_bound(data: DataSet) -> float:
    """max_i |y_i|, the empirical bound on the output magnitude."""
    return float(np.max(np.abs(data.y)))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Exact population oracle: weighted support points with regression values.

    Represents the input marginal as a finite weighted set of points, with the
    regression function given by `values` on the support. Outputs are sampled
    as y = value + clipped Gaussian noise (clipped at NOISE_CLIP_SDS standard
    deviations so the boundedness assumption on |y| holds exactly).
    """

    support: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)
    values: np.ndarray  # (m,) regression function on the support
    noise_sd: float = 0.0

    def __post_init__(self):
        s = _as_matrix(self.support, "support")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if not (s.shape[0] == w.shape[0] == v.shape[0]):
            raise ContractViolation("support, weights, values must have equal length")
        if np.any(w < 0):
            raise ContractViolation("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ContractViolation(f"weights sum to {w.sum()}, expected 1")
        if self.noise_sd < 0:
            raise ContractViolation("noise_sd must be nonnegative")
        for a in (s, w, v):
            a.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.support.shape[1]

    def kappa(self) -> float:
        return float(np.max(np.sum(self.support * self.support, axis=1)))

    def m(self) -> float:
        return float(np.max(np.abs(self.values)) + NOISE_CLIP_SDS * self.noise_sd)

    def sample(self, n: int, rng: np.random.Generator) -> DataSet:
        """Draw n i.i.d. points: x from the weighted support, y = f(x) + noise."""
        if n < 1:
            raise ContractViolation("sample size must be >= 1")
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        y = self.values[idx].copy()
        if self.noise_sd > 0:
            clip = NOISE_CLIP_SDS * self.noise_sd
            y += np.clip(rng.normal(0.0, self.noise_sd, size=n), -clip, clip)
        return DataSet(self.support[idx], y)


def population_operators(dist: DiscreteDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Second-moment operator T = sum_j w_j x_j x_j^T and h = sum_j w_j v_j x_j."""
    xw = dist.support * dist.weights[:, None]
    T = xw.T @ dist.support
    T = 0.5 * (T + T.T)  # symmetrize round-off
    h = xw.T @ dist.values
    return T, h


def empirical_risk(w: np.ndarray, data: DataSet) -> float:
    """(1/n) sum_i (<w, x_i> - y_i)^2."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != data.d:
        raise ContractViolation(f"w has dim {w.shape[0]}, data has d={data.d}")
    r = data.x @ w - data.y
    return float(np.dot(r, r) / data.n)


def population_excess_risk(w: np.ndarray, dist: DiscreteDistribution) -> float:
    """sum_j w_j (<w, x_j> - v_j)^2, the excess risk over the best predictor.

    Noise variance is excluded by construction: `values` holds the regression
    function, so this is exactly the squared population distance to it.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != dist.d:
        raise ContractViolation(f"w has dim {w.shape[0]}, support has d={dist.d}")
    r = dist.support @ w - dist.values
    return float(np.dot(dist.weights, r * r))


@dataclass(frozen=True)
class SourceProblem:
    """A constructed problem with known source exponent r and ground truth.

    The distribution's second-moment operator is diagonal with the stored
    eigenvalues; `generator` holds the coefficients of the source element in
    that eigenbasis, so that every norm/risk bound is exactly evaluable.
    """

    distribution: DiscreteDistribution
    r: float
    g_norm: float
    kappa: float
    M: float
    eigenvalues: np.ndarray  # (d,) descending, positive
    generator: np.ndarray  # (d,) coefficients of g in the eigenbasis
    w_dagger: np.ndarray | None = None  # present iff r >= 1/2

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        gen = np.asarray(self.generator, dtype=float).reshape(-1)
        ev.setflags(write=False)
        gen.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "generator", gen)
        if self.r < 0:
            raise ContractViolation("source exponent r must be >= 0")
        if self.kappa < self.distribution.kappa() - 1e-9:
            raise ContractViolation("kappa must dominate max support ||x||^2")


@dataclass(frozen=True)
class RiskReport:
    """Risk summary for one iterate."""

    empirical_risk: float
    excess_risk: float | None = None
    iterate_distance: float | None = None  # ||w - w_dagger|| when known

    def __post_init__(self):
        for v in (self.empirical_risk, self.excess_risk, self.iterate_distance):
            if v is not None and v < -1e-15:
                raise ContractViolation("risk report values must be nonnegative")
