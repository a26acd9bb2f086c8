"""Experiment engine: learning curves, Monte Carlo rate estimation,
bound-verification suites and concentration-frequency checks."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import partial

import numpy as np

from .kernels import (
    DualState,
    KernelSpec,
    classification_error,
    dual_kappa,
    gram_matrix,
    kiir_epoch,
    kir_epoch,
    krr_fit,
    predict,
)
from .linear import (
    IterState,
    build_epoch_map,
    build_population_epoch_map,
    epoch_update,
    population_epoch_update,
    product_decomposition_check,
    resolve_gamma,
    sum_decomposition_check,
)
from .model import (
    ContractViolation,
    DataSet,
    DiscreteDistribution,
    SourceProblem,
    population_excess_risk,
    population_operators,
)
from .stopping import StoppingRule, holdout_select, stopping_time
from .synth import exact_population_trajectory

BOUND_TOLERANCE = 1e-8


def max_workers() -> int:
    """Worker cap from IIR_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("IIR_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration shared by the harness entry points."""

    preset: str = "trig-d5"
    kernel: str | None = None
    gamma: float | str = "auto"
    rule: StoppingRule | None = None
    grid: tuple[int, ...] = ()
    replicates: int = 1
    seed: int = 0
    epochs: int = 100
    n: int = 100

    def __post_init__(self):
        if self.replicates < 1:
            raise ContractViolation("replicates must be >= 1")
        if self.grid and any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ContractViolation("grid must be strictly increasing")


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares slope of log error against log n."""

    slope: float
    intercept: float
    stderr: float
    points: tuple[tuple[float, float], ...]  # (log n, log error)


def fit_loglog(ns, errors) -> RateEstimate:
    """Fit log(error) = slope * log(n) + intercept by least squares."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.size < 3:
        raise ContractViolation("need at least 3 grid points for a slope")
    if np.any(errors <= 0):
        raise ContractViolation("errors must be positive for a log-log fit")
    lx, ly = np.log(ns), np.log(errors)
    (slope, intercept), cov = np.polyfit(lx, ly, 1, cov=True)
    return RateEstimate(
        slope=float(slope),
        intercept=float(intercept),
        stderr=float(np.sqrt(cov[0, 0])),
        points=tuple(zip(lx.tolist(), ly.tolist())),
    )


def _run_iir_replicates(
    xs: np.ndarray, ys: np.ndarray, gamma: float, epochs: int
) -> np.ndarray:
    """Run IIR from zero on R replicate datasets at once.

    xs is (R, n, d), ys is (R, n); the inner cyclic loop is shared across
    replicates so each step is a vectorized O(R d) update. Agrees with
    epoch_update applied per replicate (tested).
    """
    R, n, d = xs.shape
    eta = gamma / n
    w = np.zeros((R, d))
    for _ in range(epochs):
        for i in range(n):
            xi = xs[:, i, :]
            resid = np.einsum("rd,rd->r", xi, w) - ys[:, i]
            w -= eta * resid[:, None] * xi
    return w


def estimate_rate(
    problem: SourceProblem,
    rule: StoppingRule,
    grid,
    replicates: int = 50,
    seed: int = 0,
    mode: str = "norm",
    gamma: float | str = "auto",
) -> dict:
    """Monte Carlo estimate of the error decay exponent.

    For each n in the grid, draws `replicates` datasets, runs IIR for
    t*(n) epochs with gamma = kappa^{-1} (kappa from the problem, so the step
    is the same across replicates), and records the mean of ||w - w_dagger||
    (mode "norm", needs r > 1/2) or of the excess risk (mode "risk"). Returns
    the fitted log-log slope and the per-n averages.
    """
    grid = [int(n) for n in grid]
    if sorted(grid) != grid or len(set(grid)) != len(grid):
        raise ContractViolation("grid must be strictly increasing")
    if math.log10(grid[-1] / grid[0]) < 1.5:
        raise ContractViolation("grid must span at least 1.5 decades")
    if mode not in ("norm", "risk"):
        raise ContractViolation("mode must be 'norm' or 'risk'")
    if mode == "norm" and problem.w_dagger is None:
        raise ContractViolation("norm mode needs r > 1/2 (w_dagger known)")
    g = 1.0 / problem.kappa if gamma in (None, "auto") else float(gamma)
    if not 0 < g <= 1.0 / problem.kappa * (1 + 1e-12):
        raise ContractViolation("gamma must lie in ]0, kappa^{-1}]")

    dist = problem.distribution

    def one_grid_point(ni: int, n: int) -> tuple[int, float]:
        t = stopping_time(rule, n)
        xs = np.empty((replicates, n, dist.d))
        ys = np.empty((replicates, n))
        for rep in range(replicates):
            rng = np.random.default_rng([seed, ni, rep])
            data = dist.sample(n, rng)
            xs[rep] = data.x
            ys[rep] = data.y
        w = _run_iir_replicates(xs, ys, g, t)
        if mode == "norm":
            errs = np.linalg.norm(w - problem.w_dagger[None, :], axis=1)
        else:
            errs = np.array([population_excess_risk(wi, dist) for wi in w])
        return t, float(np.mean(errs))

    workers = min(max_workers(), len(grid))
    if workers > 1:
        # grid points are independent; results reassembled in grid order so
        # the report is identical to the sequential run
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_grid_point, range(len(grid)), grid))
    else:
        results = [one_grid_point(ni, n) for ni, n in enumerate(grid)]
    stop_epochs = [t for t, _ in results]
    errors = [e for _, e in results]

    est = fit_loglog(grid, errors)
    return {
        "slope": est.slope,
        "intercept": est.intercept,
        "stderr": est.stderr,
        "grid": grid,
        "stop_epochs": stop_epochs,
        "mean_errors": errors,
        "mode": mode,
        "gamma": g,
        "replicates": replicates,
    }


def verify_bounds(
    problem: SourceProblem, gamma: float | str = "auto", epochs: int = 1000, n: int = 10
) -> dict:
    """Evaluate the population norm/risk/distance bounds along the exact
    trajectory for t = 1..epochs and report the worst violation ratio of each
    applicable bound (pass iff ratio <= 1 + 1e-8)."""
    g = 1.0 / problem.kappa if gamma in (None, "auto") else float(gamma)
    traj = exact_population_trajectory(problem, g, n, epochs)
    r, kappa, gn = problem.r, problem.kappa, problem.g_norm
    dist = problem.distribution

    ts = np.arange(1, epochs + 1, dtype=float)
    norms = np.array([np.linalg.norm(w) for w in traj[1:]])
    risks = np.array([population_excess_risk(w, dist) for w in traj[1:]])

    if r < 0.5:
        norm_bound = np.maximum(kappa ** (r - 0.5), (g * ts) ** (0.5 - r)) * gn
    else:
        norm_bound = np.full_like(ts, kappa ** (r - 0.5) * gn)
    risk_bound = (r / (g * ts)) ** (2 * r) * gn**2 if r > 0 else np.full_like(ts, gn**2)

    def entry(values, bounds) -> dict:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(bounds > 0, values / bounds, np.inf)
        worst = float(np.max(ratios))
        return {
            "applicable": True,
            "max_ratio": worst,
            "pass": worst <= 1.0 + BOUND_TOLERANCE,
        }

    report = {
        "r": r,
        "gamma": g,
        "epochs": epochs,
        "bounds": {
            "iterate_norm": entry(norms, norm_bound),
            "excess_risk": entry(risks, risk_bound),
        },
    }
    if r > 0.5:
        dists = np.array([np.linalg.norm(w - problem.w_dagger) for w in traj[1:]])
        dist_bound = ((r - 0.5) / (g * ts)) ** (r - 0.5) * gn
        report["bounds"]["distance_to_minimizer"] = entry(dists, dist_bound)
    else:
        report["bounds"]["distance_to_minimizer"] = {
            "applicable": False,
            "skipped": "needs r > 1/2",
        }
    report["pass"] = all(
        b["pass"] for b in report["bounds"].values() if b.get("applicable")
    )
    return report


def concentration_frequencies(
    dist: DiscreteDistribution,
    n: int,
    delta: float,
    trials: int = 500,
    seed: int = 0,
    gamma: float | str = "auto",
) -> dict:
    """Empirical exceedance frequencies of the four concentration inequalities
    (deviations of That, the empirical output moment, Ahat and bhat from their
    population counterparts). Pass iff every frequency is <= delta."""
    if trials < 100:
        raise ContractViolation("need at least 100 trials")
    if not 0 < delta < 1:
        raise ContractViolation("delta must lie in (0, 1)")
    kappa, M = dist.kappa(), dist.m()
    g = 1.0 / kappa if gamma in (None, "auto") else float(gamma)
    T, h = population_operators(dist)
    pop = build_population_epoch_map(dist, g, n)
    root_n = math.sqrt(n)
    thresholds = {
        "cov_operator": 16 * kappa / (3 * root_n) * math.log(2 / delta),
        "output_moment": 16 * math.sqrt(kappa) * M / (3 * root_n) * math.log(2 / delta),
        "A_correction": 32 * kappa**2 / (3 * root_n) * math.log(4 / delta),
        "b_correction": 32 * kappa * M**2 / (3 * root_n) * math.log(4 / delta),
    }
    exceed = dict.fromkeys(thresholds, 0)
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        data = dist.sample(n, rng)
        T_hat = (data.x.T @ data.x) / n
        v_hat = (data.x.T @ data.y) / n
        em = build_epoch_map(data, g)
        devs = {
            "cov_operator": np.linalg.norm(T_hat - T, "fro"),
            "output_moment": np.linalg.norm(v_hat - h),
            "A_correction": np.linalg.norm(em.A_hat - pop.A_hat, "fro"),
            "b_correction": np.linalg.norm(em.b_hat - pop.b_hat),
        }
        for key, dev in devs.items():
            if dev > thresholds[key]:
                exceed[key] += 1
    freqs = {k: v / trials for k, v in exceed.items()}
    return {
        "n": n,
        "delta": delta,
        "trials": trials,
        "gamma": g,
        "thresholds": thresholds,
        "frequencies": freqs,
        "pass": all(f <= delta for f in freqs.values()),
    }


def algebra_checks(seed: int = 0, trials: int = 100) -> dict:
    """Randomized checks of the exact operator identities: epoch map vs the
    unrolled cycle, contraction norm, population epoch = n gradient steps, and
    the product/sum decompositions. Returns worst deviations and a verdict."""
    rng = np.random.default_rng(seed)
    worst = {
        "epoch_map_residual": 0.0,
        "contraction_norm": 0.0,
        "population_gd_residual": 0.0,
        "decprod_residual": 0.0,
        "decsum_residual": 0.0,
    }
    for _ in range(trials):
        n = int(rng.integers(1, 51))
        d = int(rng.integers(1, 11))
        data = DataSet(rng.standard_normal((n, d)), rng.standard_normal(n))
        gamma = 1.0 / float(np.max(np.sum(data.x**2, axis=1)))
        em = build_epoch_map(data, gamma)
        w0 = rng.standard_normal(d)
        direct = epoch_update(IterState(w=w0, gamma=gamma), data).w
        res = np.linalg.norm(em.apply(w0) - direct) / (1.0 + np.linalg.norm(w0))
        worst["epoch_map_residual"] = max(worst["epoch_map_residual"], res)
        worst["contraction_norm"] = max(
            worst["contraction_norm"], float(np.linalg.norm(em.contraction, 2))
        )

        m = int(rng.integers(1, 4))
        pts = rng.standard_normal((m, d))
        wts = rng.uniform(0.1, 1.0, m)
        dist = DiscreteDistribution(pts, wts / wts.sum(), rng.standard_normal(m))
        T, h = population_operators(dist)
        n_pop = int(rng.integers(1, 20))
        g_pop = 0.5 / float(np.linalg.norm(T, 2))
        state = population_epoch_update(
            IterState(w=w0, gamma=g_pop), dist, n_pop
        )
        u = w0.copy()
        for _ in range(n_pop):
            u = u - (g_pop / n_pop) * (T @ u - h)
        worst["population_gd_residual"] = max(
            worst["population_gd_residual"], float(np.linalg.norm(state.w - u))
        )

        k = int(rng.integers(1, 9))
        ops = [rng.standard_normal((5, 5)) * 0.4 for _ in range(k)]
        lhs, rhs = product_decomposition_check(ops)
        denom = 1.0 + np.linalg.norm(lhs)
        worst["decprod_residual"] = max(
            worst["decprod_residual"], float(np.linalg.norm(lhs - rhs) / denom)
        )
        vecs = [rng.standard_normal(5) for _ in range(k)]
        lv, rv = sum_decomposition_check(ops, vecs)
        worst["decsum_residual"] = max(
            worst["decsum_residual"],
            float(np.linalg.norm(lv - rv) / (1.0 + np.linalg.norm(lv))),
        )
    checks = {
        "epoch_map_residual": worst["epoch_map_residual"] <= 1e-10,
        "contraction_norm": worst["contraction_norm"] <= 1.0 + 1e-12,
        "population_gd_residual": worst["population_gd_residual"] <= 1e-12,
        "decprod_residual": worst["decprod_residual"] <= 1e-10,
        "decsum_residual": worst["decsum_residual"] <= 1e-10,
    }
    return {
        "trials": trials,
        "worst": worst,
        "checks": checks,
        "pass": all(checks.values()),
    }


def _metric(pred: np.ndarray, y: np.ndarray, task: str) -> float:
    if task == "classification":
        return classification_error(pred, y)
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def iir_learner(train: DataSet, max_epochs: int, gamma: float | str = "auto"):
    """Yield one primal predictor per IIR epoch (for holdout_select)."""
    g = resolve_gamma(gamma, train)
    state = IterState(w=np.zeros(train.d), gamma=g)
    for _ in range(max_epochs):
        state = epoch_update(state, train)
        w = state.w
        yield lambda X, w=w: np.atleast_2d(X) @ w


def kiir_learner(
    train: DataSet, max_epochs: int, kernel: KernelSpec, gamma: float | str = "auto"
):
    """Yield one dual predictor per KIIR epoch."""
    G = gram_matrix(kernel, train.x)
    g = 1.0 / dual_kappa(G) if gamma in (None, "auto") else float(gamma)
    state = DualState(alpha=np.zeros(train.n), gram=G, gamma=g)
    for _ in range(max_epochs):
        state = kiir_epoch(state, train.y)
        alpha = state.alpha
        yield lambda X, a=alpha: predict(kernel, train.x, a, X)


def kir_learner(
    train: DataSet, max_epochs: int, kernel: KernelSpec, gamma: float | str = "auto"
):
    """Yield one dual predictor per KIR (batch) epoch."""
    G = gram_matrix(kernel, train.x)
    g = 1.0 / dual_kappa(G) if gamma in (None, "auto") else float(gamma)
    state = DualState(alpha=np.zeros(train.n), gram=G, gamma=g)
    for _ in range(max_epochs):
        state = kir_epoch(state, train.y)
        alpha = state.alpha
        yield lambda X, a=alpha: predict(kernel, train.x, a, X)


def error_curve(
    train: DataSet,
    test: DataSet,
    epochs: int,
    gamma: float | str = "auto",
    kernel: KernelSpec | None = None,
    validation_fraction: float = 0.2,
    seed: int = 0,
) -> list[tuple[int, float, float, float]]:
    """Train IIR (or KIIR with a kernel) to `epochs`, recording training,
    validation (single seeded split of `train`) and test error per epoch."""
    n_val = int(round(validation_fraction * train.n))
    if n_val < 1 or train.n - n_val < 1:
        raise ContractViolation("validation split is empty")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(train.n)
    fit, val = train.subset(perm[n_val:]), train.subset(perm[:n_val])

    if kernel is None:
        learner = iir_learner(fit, epochs, gamma)
    else:
        learner = kiir_learner(fit, epochs, kernel, gamma)
    rows = []
    for t, predictor in enumerate(learner, start=1):
        rows.append(
            (
                t,
                _metric(predictor(fit.x), fit.y, train.task),
                _metric(predictor(val.x), val.y, train.task),
                _metric(predictor(test.x), test.y, train.task),
            )
        )
    return rows


DEFAULT_LAMBDA_GRID = tuple(np.logspace(-8, 0, 17).tolist())


def _krr_holdout(
    train: DataSet, kernel: KernelSpec, lambdas, validation_fraction: float, seed: int
) -> tuple[float, np.ndarray]:
    """Pick lambda on a single holdout split, then refit on all of train."""
    n_val = int(round(validation_fraction * train.n))
    if n_val < 1 or train.n - n_val < 1:
        raise ContractViolation("validation split is empty")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(train.n)
    fit, val = train.subset(perm[n_val:]), train.subset(perm[:n_val])
    G_fit = gram_matrix(kernel, fit.x)
    best_lam, best_err = None, np.inf
    for lam in lambdas:
        alpha = krr_fit(G_fit, fit.y, lam)
        err = _metric(predict(kernel, fit.x, alpha, val.x), val.y, train.task)
        if err < best_err:
            best_lam, best_err = lam, err
    alpha = krr_fit(gram_matrix(kernel, train.x), train.y, best_lam)
    return best_lam, alpha


def baseline_comparison(
    data: DataSet,
    kernel: KernelSpec,
    seeds,
    max_epochs: int = 100,
    test_fraction: float = 0.2,
    validation_fraction: float = 0.2,
    lambdas=DEFAULT_LAMBDA_GRID,
    gamma: float | str = "auto",
) -> dict:
    """Median test error of holdout-stopped KIIR and KIR against KRR with a
    holdout-tuned lambda, over seeded train/test splits."""
    n_test = int(round(test_fraction * data.n))
    if n_test < 1 or data.n - n_test < 2:
        raise ContractViolation("dataset too small for a train/test split")
    rule = StoppingRule(
        "holdout", validation_fraction=validation_fraction, max_epochs=max_epochs
    )
    per_seed = {"KIIR": [], "KIR": [], "KRR": []}
    details = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(data.n)
        test, train = data.subset(perm[:n_test]), data.subset(perm[n_test:])

        row = {"seed": int(seed)}
        for name, factory in (
            ("KIIR", partial(kiir_learner, kernel=kernel, gamma=gamma)),
            ("KIR", partial(kir_learner, kernel=kernel, gamma=gamma)),
        ):
            t_sel, _ = holdout_select(train, factory, rule, seed=seed)
            # retrain on the full training split for the selected epoch count
            final = None
            for t, predictor in enumerate(factory(train, t_sel), start=1):
                final = predictor
            err = _metric(final(test.x), test.y, data.task)
            per_seed[name].append(err)
            row[name] = {"stopped_epoch": t_sel, "test_error": err}
        lam, alpha = _krr_holdout(train, kernel, lambdas, validation_fraction, seed)
        err = _metric(predict(kernel, train.x, alpha, test.x), test.y, data.task)
        per_seed["KRR"].append(err)
        row["KRR"] = {"lambda": lam, "test_error": err}
        details.append(row)
    return {
        "metric": "classification error" if data.task == "classification" else "RMSE",
        "median": {k: float(np.median(v)) for k, v in per_seed.items()},
        "per_seed": details,
    }
