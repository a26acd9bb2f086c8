"""Incremental iterative regularization in R^d.

One epoch is a cyclic pass over the sample in fixed dataset order, updating
after every point. The epoch can equivalently be written as an affine map
w -> (I - g*That + g^2*Ahat) w + offset, and the population counterpart of an
epoch coincides with n plain gradient steps of size gamma/n. Both identities
are implemented here and checked by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    ContractViolation,
    DataSet,
    DiscreteDistribution,
    kappa_bound,
    population_operators,
)


@dataclass(frozen=True)
class IterState:
    """Current iterate, epoch counter and step size."""

    w: np.ndarray
    epoch: int = 0
    gamma: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if self.gamma <= 0:
            raise ContractViolation("step size gamma must be positive")
        if self.epoch < 0:
            raise ContractViolation("epoch must be nonnegative")


@dataclass(frozen=True)
class EpochMap:
    """Affine form of one epoch: w -> contraction @ w + offset."""

    contraction: np.ndarray  # I - g*That + g^2*Ahat
    offset: np.ndarray  # g*(1/n) sum_j y_j x_j - g^2*bhat
    A_hat: np.ndarray
    b_hat: np.ndarray

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.contraction @ np.asarray(w, dtype=float) + self.offset


def _check_dims(w: np.ndarray, d: int):
    if w.shape[0] != d:
        raise ContractViolation(f"iterate has dim {w.shape[0]}, expected {d}")


def epoch_update(state: IterState, data: DataSet) -> IterState:
    """One cyclic pass: for i = 1..n in dataset order,
    w <- w - (gamma/n) (<w, x_i> - y_i) x_i."""
    _check_dims(state.w, data.d)
    eta = state.gamma / data.n
    w = state.w.copy()
    x, y = data.x, data.y
    for i in range(data.n):
        xi = x[i]
        w -= eta * (xi @ w - y[i]) * xi
    return replace(state, w=w, epoch=state.epoch + 1)


def batch_gd_epoch(state: IterState, data: DataSet) -> IterState:
    """One full-gradient step of size gamma on the empirical risk."""
    _check_dims(state.w, data.d)
    g = (data.x.T @ (data.x @ state.w - data.y)) / data.n
    return replace(state, w=state.w - state.gamma * g, epoch=state.epoch + 1)


def build_epoch_map(data: DataSet, gamma: float) -> EpochMap:
    """Operator form of the epoch: contraction I - g*That + g^2*Ahat and its
    offset, where

      Ahat = (1/n^2) sum_{k=2}^n [prod_{i=k+1}^n (I - (g/n) x_i x_i^T)]
             x_k x_k^T sum_{j<k} x_j x_j^T

    and bhat has sum_{j<k} y_j x_j in place of the trailing sum. Products run
    with the factor for i = n applied last (leftmost). Dense d x d; intended
    as a verification tool for small d.
    """
    if gamma <= 0:
        raise ContractViolation("step size gamma must be positive")
    n, d = data.n, data.d
    eta = gamma / n
    x, y = data.x, data.y

    sum_T = np.zeros((d, d))  # sum_{j<k} x_j x_j^T, maintained incrementally
    sum_v = np.zeros(d)  # sum_{j<k} y_j x_j
    for j in range(n - 1):
        sum_T += np.outer(x[j], x[j])
        sum_v += y[j] * x[j]
    # Walk k = n..2 keeping the suffix product P = prod_{i=k+1}^n (I - eta T_{x_i}).
    P = np.eye(d)
    A_hat = np.zeros((d, d))
    b_hat = np.zeros(d)
    for k in range(n - 1, 0, -1):
        xk = x[k]
        u = P @ xk  # P @ T_{x_k} = outer(u, xk), rank one
        A_hat += np.outer(u, sum_T @ xk)
        b_hat += (xk @ sum_v) * u
        P -= eta * np.outer(u, xk)
        sum_T -= np.outer(x[k - 1], x[k - 1])
        sum_v -= y[k - 1] * x[k - 1]
    A_hat /= n * n
    b_hat /= n * n

    T_hat = (data.x.T @ data.x) / n
    v_bar = (data.x.T @ data.y) / n
    contraction = np.eye(d) - gamma * T_hat + gamma * gamma * A_hat
    offset = gamma * v_bar - gamma * gamma * b_hat
    return EpochMap(contraction=contraction, offset=offset, A_hat=A_hat, b_hat=b_hat)


def build_population_epoch_map(
    dist: DiscreteDistribution, gamma: float, n: int
) -> EpochMap:
    """Population analog of build_epoch_map: every T_{x_i} replaced by T and
    every y_j x_j by h = S* g_rho, for a nominal sample size n."""
    if gamma <= 0:
        raise ContractViolation("step size gamma must be positive")
    if n < 1:
        raise ContractViolation("n must be >= 1")
    T, h = population_operators(dist)
    d = T.shape[0]
    eta = gamma / n
    step = np.eye(d) - eta * T
    P = np.eye(d)
    A = np.zeros((d, d))
    b = np.zeros(d)
    for k in range(n, 1, -1):  # suffix power (I - eta T)^(n-k)
        A += (k - 1) * (P @ T @ T)
        b += (k - 1) * (P @ T @ h)
        P = P @ step
    A /= n * n
    b /= n * n
    contraction = np.eye(d) - gamma * T + gamma * gamma * A
    offset = gamma * h - gamma * gamma * b
    return EpochMap(contraction=contraction, offset=offset, A_hat=A, b_hat=b)


def population_epoch_update(
    state: IterState, dist: DiscreteDistribution, n: int
) -> IterState:
    """Expected-iteration epoch: n identical steps u <- u - (gamma/n)(T u - h).

    Coincides with n steps of gradient descent on the risk with step gamma/n.
    """
    _check_dims(state.w, dist.d)
    if n < 1:
        raise ContractViolation("n must be >= 1")
    T, h = population_operators(dist)
    eta = state.gamma / n
    w = state.w.copy()
    for _ in range(n):
        w -= eta * (T @ w - h)
    return replace(state, w=w, epoch=state.epoch + 1)


def product_decomposition_check(
    operators: list[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the product decomposition

      prod_i (I - T_i) = I - sum_j T_j
                         + sum_{k=2}^n [prod_{i=k+1}^n (I - T_i)] T_k sum_{j<k} T_j

    (products composed with the i = n factor leftmost; empty sums are zero).
    """
    ops = [np.asarray(T, dtype=float) for T in operators]
    if not ops:
        raise ContractViolation("need at least one operator")
    d = ops[0].shape[0]
    if any(T.shape != (d, d) for T in ops):
        raise ContractViolation("operators must be square and of equal size")
    n = len(ops)
    eye = np.eye(d)

    lhs = eye.copy()
    for T in ops:
        lhs = (eye - T) @ lhs

    rhs = eye - sum(ops)
    suffix = eye.copy()
    prefix = sum(ops[:-1]) if n > 1 else np.zeros((d, d))
    for k in range(n, 1, -1):
        rhs = rhs + suffix @ ops[k - 1] @ prefix
        suffix = suffix @ (eye - ops[k - 1])
        prefix = prefix - ops[k - 2]
    return lhs, rhs


def sum_decomposition_check(
    operators: list[np.ndarray], vectors: list[np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the companion sum decomposition

      sum_i [prod_{k=i+1}^n (I - T_k)] w_i
        = sum_i w_i - sum_{k=2}^n [prod_{i=k+1}^n (I - T_i)] T_k sum_{j<k} w_j.
    """
    ops = [np.asarray(T, dtype=float) for T in operators]
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if len(ops) != len(vecs) or not ops:
        raise ContractViolation("need equally many operators and vectors, >= 1")
    n = len(ops)
    d = ops[0].shape[0]
    eye = np.eye(d)

    lhs = np.zeros(d)
    suffix = eye.copy()
    for i in range(n, 0, -1):
        lhs = lhs + suffix @ vecs[i - 1]
        suffix = (suffix @ (eye - ops[i - 1])) if i > 1 else suffix
    # recompute suffix products cleanly for the rhs correction
    rhs = np.sum(vecs, axis=0)
    suffix = eye.copy()
    prefix = np.sum(vecs[:-1], axis=0) if n > 1 else np.zeros(d)
    for k in range(n, 1, -1):
        rhs = rhs - suffix @ (ops[k - 1] @ prefix)
        suffix = suffix @ (eye - ops[k - 1])
        prefix = prefix - vecs[k - 2]
    return lhs, rhs


def resolve_gamma(
    gamma, data: DataSet, *, allow_large: bool = False, kappa: float | None = None
) -> float:
    """Resolve a step size. "auto"/None means kappa^{-1} with kappa from the
    data; numeric values are validated against the guaranteed-safe range
    ]0, 1/kappa] unless allow_large is set, which relaxes it to ]0, n/kappa]
    (the widest range for which single epochs stay non-expansive)."""
    k = kappa if kappa is not None else kappa_bound(data)
    if gamma is None or gamma == "auto":
        return 1.0 / k
    g = float(gamma)
    if g <= 0:
        raise ContractViolation("step size gamma must be positive")
    limit = data.n / k if allow_large else 1.0 / k
    if g > limit * (1 + 1e-12):
        raise ContractViolation(
            f"gamma={g} exceeds the admissible range (limit {limit}); "
            "pass allow_large to use the looser range"
        )
    return g


def run_iir(
    data: DataSet,
    gamma,
    epochs: int,
    trace: bool = False,
    *,
    allow_large_gamma: bool = False,
) -> list[IterState]:
    """Run incremental iterative regularization from w_0 = 0.

    Returns the full trajectory [w_0, ..., w_T] when trace is set, otherwise
    just [w_T].
    """
    if epochs < 0:
        raise ContractViolation("epochs must be >= 0")
    g = resolve_gamma(gamma, data, allow_large=allow_large_gamma)
    state = IterState(w=np.zeros(data.d), epoch=0, gamma=g)
    states = [state]
    for _ in range(epochs):
        state = epoch_update(state, data)
        states.append(state)
    return states if trace else [states[-1]]


def single_pass_sgd(data: DataSet, alpha: float) -> np.ndarray:
    """Single epoch with gamma = kappa^{-1} n^alpha (inner step kappa^{-1}
    n^{alpha-1}), the one-pass stochastic-gradient regime. Requires
    0 <= alpha < 1/4."""
    if not 0 <= alpha < 0.25:
        raise ContractViolation("alpha must lie in [0, 1/4)")
    gamma = data.n**alpha / kappa_bound(data)
    state = IterState(w=np.zeros(data.d), epoch=0, gamma=gamma)
    return epoch_update(state, data).w
