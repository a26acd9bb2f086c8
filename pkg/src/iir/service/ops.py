"""Command handlers shared by the FastAPI endpoints and the CLI."""

from __future__ import annotations

import time
from functools import partial

import numpy as np

from .. import bench
from ..io import ResultEnvelope, dataset_csv, load_csv, load_libsvm
from ..kernels import DualState, dual_kappa, gram_matrix, kiir_epoch, parse_kernel, predict
from ..linear import run_iir
from ..model import ContractViolation, DataSet, SourceProblem, empirical_risk
from ..stopping import holdout_select, parse_rule, stopping_time
from ..synth import TrigProblem, parse_preset, sample_trig
from . import schemas


def _load_file(req: schemas.DataSource) -> DataSet:
    if req.data_format == "libsvm":
        return load_libsvm(req.data_path, task=req.task)
    return load_csv(
        req.data_path,
        target_column=req.target_column,
        has_header=req.has_header,
        task=req.task,
    )


def _resolve_dataset(req: schemas.DataSource, seed: int) -> tuple[DataSet, dict]:
    """Dataset from a file path or sampled from a preset, plus metadata."""
    if req.data_path:
        return _load_file(req), {"source": req.data_path}
    problem = parse_preset(req.preset or "trig-d5")
    if isinstance(problem, TrigProblem):
        data, w_star = sample_trig(problem, req.n, seed=seed)
        return data, {"source": req.preset, "w_star": w_star.tolist()}
    rng = np.random.default_rng([seed, 0])
    return problem.distribution.sample(req.n, rng), {"source": req.preset}


def _fresh_test(req: schemas.DataSource, seed: int, n_test: int) -> DataSet:
    problem = parse_preset(req.preset or "trig-d5")
    if isinstance(problem, TrigProblem):
        # same w_star as the training sample (the draw is seed-determined),
        # fresh inputs and noise
        _, w_star = sample_trig(problem, 1, seed=seed)
        fixed = TrigProblem(d=problem.d, w_star=w_star, noise_sd=problem.noise_sd)
        data, _ = sample_trig(fixed, n_test, seed=seed + 1_000_003)
        return data
    rng = np.random.default_rng([seed, 1])
    return problem.distribution.sample(n_test, rng)


def _finish(command: str, config, seed: int, metrics: dict, start: float) -> ResultEnvelope:
    return ResultEnvelope(
        command=command,
        config=config.model_dump(),
        seed=seed,
        metrics=metrics,
        timing_seconds=time.perf_counter() - start,
    )


def run_fit(req: schemas.FitRequest) -> ResultEnvelope:
    start = time.perf_counter()
    data, meta = _resolve_dataset(req, req.seed)
    rule = parse_rule(req.rule)
    kernel = parse_kernel(req.kernel) if req.kernel else None

    if kernel is None:
        factory = partial(bench.iir_learner, gamma=req.gamma)
    else:
        factory = partial(bench.kiir_learner, kernel=kernel, gamma=req.gamma)

    if rule.variant == "holdout":
        t_stop, curve = holdout_select(data, factory, rule, seed=req.seed)
        val_curve = [[t, e] for t, e in curve]
    else:
        t_stop = stopping_time(rule, data.n)
        val_curve = None

    if kernel is None:
        final = run_iir(data, req.gamma, t_stop)[-1]
        coefficients = final.w
        train_pred = data.x @ final.w
    else:
        G = gram_matrix(kernel, data.x)
        g = 1.0 / dual_kappa(G) if req.gamma in (None, "auto") else float(req.gamma)
        state = DualState(alpha=np.zeros(data.n), gram=G, gamma=g)
        for _ in range(t_stop):
            state = kiir_epoch(state, data.y)
        coefficients = state.alpha
        train_pred = predict(kernel, data.x, state.alpha, data.x)

    metrics = {
        "stopped_epoch": t_stop,
        "coefficients": coefficients.tolist(),
        "dual": kernel is not None,
        "train_error": bench._metric(train_pred, data.y, data.task),
        "empirical_risk": (
            empirical_risk(coefficients, data) if kernel is None else None
        ),
        **meta,
    }
    if val_curve is not None:
        metrics["validation_curve"] = val_curve
    return _finish("fit", req, req.seed, metrics, start)


def run_curve(req: schemas.CurveRequest) -> ResultEnvelope:
    start = time.perf_counter()
    data, meta = _resolve_dataset(req, req.seed)
    if req.data_path:
        # held-out test split for file-backed data
        rng = np.random.default_rng(req.seed)
        perm = rng.permutation(data.n)
        n_test = max(1, int(round(0.2 * data.n)))
        test, data = data.subset(perm[:n_test]), data.subset(perm[n_test:])
    else:
        test = _fresh_test(req, req.seed, req.test_n)
    kernel = parse_kernel(req.kernel) if req.kernel else None
    rows = bench.error_curve(
        data,
        test,
        epochs=req.epochs,
        gamma=req.gamma,
        kernel=kernel,
        validation_fraction=req.validation_fraction,
        seed=req.seed,
    )
    metrics = {"rows": [list(r) for r in rows], **meta}
    return _finish("curve", req, req.seed, metrics, start)


def run_rates(req: schemas.RatesRequest) -> ResultEnvelope:
    start = time.perf_counter()
    problem = parse_preset(req.preset)
    if not isinstance(problem, SourceProblem):
        raise ContractViolation("rates needs a source:<...> preset")
    rule = parse_rule(req.rule)
    report = bench.estimate_rate(
        problem,
        rule,
        req.grid,
        replicates=req.replicates,
        seed=req.seed,
        mode=req.mode,
        gamma=req.gamma,
    )
    return _finish("rates", req, req.seed, report, start)


def run_verify(req: schemas.VerifyRequest) -> ResultEnvelope:
    start = time.perf_counter()
    problem = parse_preset(req.preset)
    if not isinstance(problem, SourceProblem):
        raise ContractViolation("verify needs a source:<...> preset")
    bounds = bench.verify_bounds(problem, gamma=req.gamma, epochs=req.epochs)
    algebra = bench.algebra_checks(seed=req.seed, trials=req.algebra_trials)
    conc = bench.concentration_frequencies(
        problem.distribution,
        n=req.concentration_n,
        delta=req.concentration_delta,
        trials=req.concentration_trials,
        seed=req.seed,
    )
    metrics = {
        "bounds": bounds,
        "algebra": algebra,
        "concentration": conc,
        "pass": bounds["pass"] and algebra["pass"] and conc["pass"],
    }
    return _finish("verify", req, req.seed, metrics, start)


def run_bench(req: schemas.BenchRequest) -> ResultEnvelope:
    start = time.perf_counter()
    data, meta = _resolve_dataset(req, req.seed)
    kernel = parse_kernel(req.kernel)
    report = bench.baseline_comparison(
        data,
        kernel,
        seeds=req.seeds,
        max_epochs=req.max_epochs,
        gamma=req.gamma,
    )
    return _finish("bench", req, req.seed, {**report, **meta}, start)


def run_synth(req: schemas.SynthRequest) -> ResultEnvelope:
    start = time.perf_counter()
    problem = parse_preset(req.preset)
    if isinstance(problem, TrigProblem):
        data, w_star = sample_trig(problem, req.n, seed=req.seed)
        meta = {"w_star": w_star.tolist()}
    else:
        rng = np.random.default_rng([req.seed, 0])
        data = problem.distribution.sample(req.n, rng)
        meta = {"r": problem.r}
    metrics = {"csv": dataset_csv(data), "n": data.n, "d": data.d, **meta}
    return _finish("synth", req, req.seed, metrics, start)
