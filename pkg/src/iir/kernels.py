"""Kernelized variants: KIIR (incremental), KIR (batch gradient) and KRR.

Everything works in the dual representation f = sum_j alpha_j K(x_j, .) over
a precomputed Gram matrix; one KIIR inner step touches a single coefficient
through one Gram row, so with the linear kernel the predictions reproduce the
primal trajectories exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ContractViolation


def trig_features(x: np.ndarray, d: int) -> np.ndarray:
    """Feature map of the trigonometric dictionary: column k (1-based) is
    cos((k-1) x) + sin((k-1) x). Accepts scalars or 1-D arrays."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    k = np.arange(d)[None, :]
    return np.cos(k * x[:, None]) + np.sin(k * x[:, None])


@dataclass(frozen=True)
class KernelSpec:
    """One of: linear, gaussian(sigma), polynomial(degree, offset),
    trig_dictionary(d) on scalar inputs."""

    kind: str
    sigma: float = 1.0
    degree: int = 2
    offset: float = 0.0
    d: int = 5

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian", "polynomial", "trig_dictionary"):
            raise ContractViolation(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ContractViolation("gaussian kernel needs sigma > 0")
        if self.kind == "polynomial" and (self.degree < 1 or self.offset < 0):
            raise ContractViolation("polynomial kernel needs degree >= 1, offset >= 0")
        if self.kind == "trig_dictionary" and self.d < 1:
            raise ContractViolation("trig_dictionary kernel needs d >= 1")


def parse_kernel(spec: str) -> KernelSpec:
    """Parse "linear", "gaussian:<sigma>", "poly:<degree>[:<offset>]" or
    "trig:<d>"."""
    parts = spec.split(":")
    kind = parts[0]
    if kind == "linear":
        return KernelSpec("linear")
    if kind == "gaussian":
        return KernelSpec("gaussian", sigma=float(parts[1]) if len(parts) > 1 else 1.0)
    if kind in ("poly", "polynomial"):
        degree = int(parts[1]) if len(parts) > 1 else 2
        offset = float(parts[2]) if len(parts) > 2 else 1.0
        return KernelSpec("polynomial", degree=degree, offset=offset)
    if kind in ("trig", "trig_dictionary"):
        return KernelSpec("trig_dictionary", d=int(parts[1]) if len(parts) > 1 else 5)
    raise ContractViolation(f"unknown kernel spec {spec!r}")


def _cross_gram(kernel: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ContractViolation("point sets have mismatched dimensions")
    if kernel.kind == "linear":
        return a @ b.T
    if kernel.kind == "gaussian":
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * kernel.sigma**2))
    if kernel.kind == "polynomial":
        return (a @ b.T + kernel.offset) ** kernel.degree
    # trig_dictionary: inputs are scalars
    if a.shape[1] != 1:
        raise ContractViolation("trig_dictionary kernel expects scalar inputs")
    fa = trig_features(a[:, 0], kernel.d)
    fb = trig_features(b[:, 0], kernel.d)
    return fa @ fb.T


def gram_matrix(kernel: KernelSpec, points: np.ndarray) -> np.ndarray:
    """Symmetric n x n matrix G_ij = K(x_i, x_j)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 1:
        raise ContractViolation("need at least one point")
    G = _cross_gram(kernel, points, points)
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class DualState:
    """Dual coefficients over a fixed Gram matrix."""

    alpha: np.ndarray  # (n,)
    gram: np.ndarray  # (n, n)
    epoch: int = 0
    gamma: float = 1.0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        gram = np.asarray(self.gram, dtype=float)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise ContractViolation("gram must be square")
        if alpha.shape[0] != gram.shape[0]:
            raise ContractViolation("alpha length must match gram size")
        if self.gamma <= 0:
            raise ContractViolation("step size gamma must be positive")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gram", gram)

    def train_predictions(self) -> np.ndarray:
        return self.gram @ self.alpha


def dual_kappa(gram: np.ndarray) -> float:
    """Step-size bound for the dual iterations: max_i K(x_i, x_i)."""
    return float(np.max(np.diag(gram)))


def kiir_epoch(state: DualState, y: np.ndarray) -> DualState:
    """One cyclic dual pass: for i = 1..n in order, with the current alpha,
    alpha_i <- alpha_i - (gamma/n) ((G alpha)_i - y_i). O(n) per inner step."""
    y = np.asarray(y, dtype=float).reshape(-1)
    G = state.gram
    n = G.shape[0]
    if y.shape[0] != n:
        raise ContractViolation("y length must match gram size")
    eta = state.gamma / n
    alpha = state.alpha.copy()
    for i in range(n):
        alpha[i] -= eta * (G[i] @ alpha - y[i])
    return replace(state, alpha=alpha, epoch=state.epoch + 1)


def kir_epoch(state: DualState, y: np.ndarray) -> DualState:
    """One batch dual step: alpha <- alpha - (gamma/n)(G alpha - y)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != state.gram.shape[0]:
        raise ContractViolation("y length must match gram size")
    alpha = state.alpha - (state.gamma / len(y)) * (state.gram @ state.alpha - y)
    return replace(state, alpha=alpha, epoch=state.epoch + 1)


def krr_fit(gram: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Kernel ridge regression: alpha = (G + n*lambda*I)^{-1} y."""
    if lam <= 0:
        raise ContractViolation("ridge parameter lambda must be positive")
    G = np.asarray(gram, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = G.shape[0]
    if y.shape[0] != n:
        raise ContractViolation("y length must match gram size")
    return np.linalg.solve(G + n * lam * np.eye(n), y)


def predict(
    kernel: KernelSpec,
    train_points: np.ndarray,
    alpha: np.ndarray,
    query_points: np.ndarray,
) -> np.ndarray:
    """Evaluate f(q) = sum_j alpha_j K(x_j, q) at the query points."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    train_points = np.atleast_2d(np.asarray(train_points, dtype=float))
    if alpha.shape[0] != train_points.shape[0]:
        raise ContractViolation("alpha length must match number of train points")
    return _cross_gram(kernel, query_points, train_points) @ alpha


def classification_error(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of sign mismatches; sign(a) = +1 iff a >= 0, labels in {-1, +1}."""
    p = np.asarray(predictions, dtype=float).reshape(-1)
    ell = np.asarray(labels, dtype=float).reshape(-1)
    if p.shape != ell.shape:
        raise ContractViolation("predictions and labels must have equal length")
    if not np.all(np.isin(ell, (-1.0, 1.0))):
        raise ContractViolation("labels must be -1 or +1")
    signs = np.where(p >= 0, 1.0, -1.0)
    return float(np.mean(signs != ell))
