"""Acceptance suite: one test per release criterion, one printed verdict each.

Verdict lines are accumulated in VERDICTS and echoed in the terminal summary
by conftest.py, so they appear even under pytest's output capture. Every test
asserts as well, so a failure is red in pytest and FAIL on the printed line.
"""

import time

import numpy as np
import pytest

from iir.bench import (
    baseline_comparison,
    concentration_frequencies,
    error_curve,
    estimate_rate,
    verify_bounds,
)
from iir.io import envelope_json
from iir.kernels import DualState, KernelSpec, gram_matrix, kiir_epoch
from iir.linear import (
    IterState,
    build_epoch_map,
    epoch_update,
    population_epoch_update,
    product_decomposition_check,
    sum_decomposition_check,
)
from iir.model import DataSet, DiscreteDistribution, population_operators
from iir.service import ops, schemas
from iir.stopping import parse_rule
from iir.synth import (
    SpectrumSpec,
    TrigProblem,
    geometric_spectrum,
    make_source_problem,
    parse_preset,
    sample_trig,
)

GRID = [64, 128, 256, 512, 1024, 2048, 4096, 8192]


VERDICTS: list[str] = []


def report(num, name, ok, detail):
    line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def random_instances(seed, count=100):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 51))
        d = int(rng.integers(1, 11))
        data = DataSet(rng.standard_normal((n, d)), rng.standard_normal(n))
        gamma = 1.0 / float(np.max(np.sum(data.x**2, axis=1)))
        w0 = rng.standard_normal(d)
        out.append((data, gamma, w0))
    return out


INSTANCES = random_instances(seed=20240817)


def test_criterion_01_epoch_map_identity():
    start = time.perf_counter()
    worst = 0.0
    for data, gamma, w0 in INSTANCES:
        em = build_epoch_map(data, gamma)
        direct = epoch_update(IterState(w=w0, gamma=gamma), data).w
        rel = np.linalg.norm(em.apply(w0) - direct) / max(np.linalg.norm(direct), 1e-30)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5.0
    report(1, "epoch-map identity", ok, f"worst rel dev {worst:.2e}, {elapsed:.2f}s")


def test_criterion_02_contraction_norm():
    worst = 0.0
    for data, gamma, _ in INSTANCES:
        em = build_epoch_map(data, gamma)
        worst = max(worst, float(np.linalg.norm(em.contraction, 2)))
    ok = worst <= 1.0 + 1e-12
    report(2, "contraction norm <= 1", ok, f"max spectral norm {worst:.15f}")


def test_criterion_03_population_epoch_is_n_gd_steps():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 5))
        d = int(rng.integers(1, 8))
        pts = rng.standard_normal((m, d))
        wts = rng.uniform(0.1, 1.0, m)
        dist = DiscreteDistribution(pts, wts / wts.sum(), rng.standard_normal(m))
        T, h = population_operators(dist)
        gamma = 0.5 / max(float(np.linalg.norm(T, 2)), 1e-12)
        n = int(rng.integers(1, 25))
        w0 = rng.standard_normal(d)
        got = population_epoch_update(IterState(w=w0, gamma=gamma), dist, n).w
        u = w0.copy()
        for _ in range(n):
            u = u - (gamma / n) * (T @ u - h)
        worst = max(worst, float(np.linalg.norm(got - u)))
    ok = worst <= 1e-12
    report(3, "population epoch = n GD steps", ok, f"worst dev {worst:.2e}")


def test_criterion_04_decomposition_identities():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        ops_list = [rng.standard_normal((5, 5)) * 0.4 for _ in range(n)]
        lhs, rhs = product_decomposition_check(ops_list)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / (1 + np.linalg.norm(lhs))))
        vecs = [rng.standard_normal(5) for _ in range(n)]
        lv, rv = sum_decomposition_check(ops_list, vecs)
        worst = max(worst, float(np.linalg.norm(lv - rv) / (1 + np.linalg.norm(lv))))
    ok = worst <= 1e-10
    report(4, "product/sum decompositions", ok, f"worst rel dev {worst:.2e}")


def source_problems():
    for weighting in ("uniform", "trace"):
        for r in (0.0, 0.25, 0.5, 1.0, 1.5):
            spec = SpectrumSpec(
                geometric_spectrum(16, 0.7), generator_norm=1.0, r=r, weighting=weighting
            )
            yield r, weighting, make_source_problem(spec, seed=0)


def test_criterion_05_norm_bounds():
    worst = 0.0
    label = ""
    for r, weighting, prob in source_problems():
        rep = verify_bounds(prob, epochs=1000)
        ratio = rep["bounds"]["iterate_norm"]["max_ratio"]
        if ratio > worst:
            worst, label = ratio, f"r={r} {weighting}"
    ok = worst <= 1.0 + 1e-8
    report(5, "iterate norm bounds", ok, f"worst ratio {worst:.6f} ({label})")


def test_criterion_06_approximation_bounds():
    worst = 0.0
    label = ""
    for r, weighting, prob in source_problems():
        rep = verify_bounds(prob, epochs=1000)
        for key in ("excess_risk", "distance_to_minimizer"):
            entry = rep["bounds"][key]
            if entry.get("applicable") and entry["max_ratio"] > worst:
                worst, label = entry["max_ratio"], f"r={r} {weighting} {key}"
    ok = worst <= 1.0 + 1e-8
    report(6, "approximation error bounds", ok, f"worst ratio {worst:.6f} ({label})")


def test_criterion_07_concentration_frequencies():
    start = time.perf_counter()
    dist = parse_preset("source:r=1.5").distribution
    rep = concentration_frequencies(dist, n=200, delta=0.1, trials=500, seed=0)
    elapsed = time.perf_counter() - start
    worst = max(rep["frequencies"].values())
    ok = rep["pass"] and elapsed < 60.0
    report(
        7,
        "concentration frequencies",
        ok,
        f"max exceedance {worst:.3f} (delta 0.1), {elapsed:.1f}s",
    )


def test_criterion_08_norm_rate_recovery():
    start = time.perf_counter()
    prob = parse_preset("source:r=1.5")
    out = estimate_rate(prob, parse_rule("norm:1.5"), GRID, replicates=50, seed=0, mode="norm")
    elapsed = time.perf_counter() - start
    slope = out["slope"]
    ok = abs(slope - (-0.25)) <= 0.15 and elapsed < 300.0
    report(8, "norm-mode rate (target -0.25)", ok, f"slope {slope:+.4f}, {elapsed:.1f}s")


def test_criterion_09_risk_rate_recovery():
    prob = parse_preset("source:r=1")
    out = estimate_rate(prob, parse_rule("risk:1"), GRID, replicates=50, seed=0, mode="risk")
    slope = out["slope"]
    ok = abs(slope - (-0.5)) <= 0.15
    report(9, "risk-mode rate (target -0.5)", ok, f"slope {slope:+.4f}")


def optimal_epoch(n, seed, epochs=400):
    prob = TrigProblem(d=5, noise_sd=1.0)
    train, w_star = sample_trig(prob, n, seed=seed)
    fixed = TrigProblem(d=5, w_star=w_star, noise_sd=1.0)
    test, _ = sample_trig(fixed, 1000, seed=seed + 1_000_003)
    rows = error_curve(train, test, epochs=epochs, seed=seed)
    return int(np.argmin([r[3] for r in rows])) + 1


def test_criterion_10_optimal_epoch_ordering():
    seeds = range(21)
    small = np.median([optimal_epoch(80, s) for s in seeds])
    large = np.median([optimal_epoch(800, s) for s in seeds])
    ok = large > small
    report(
        10,
        "more data stops later",
        ok,
        f"median optimal epoch n=80: {small:g}, n=800: {large:g}",
    )


def test_criterion_11_primal_dual_consistency():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 30))
        d = int(rng.integers(1, 6))
        data = DataSet(rng.standard_normal((n, d)), rng.standard_normal(n))
        G = gram_matrix(KernelSpec("linear"), data.x)
        gamma = 1.0 / float(np.max(np.diag(G)))
        dual = DualState(alpha=np.zeros(n), gram=G, gamma=gamma)
        primal = IterState(w=np.zeros(d), gamma=gamma)
        for _ in range(8):
            dual = kiir_epoch(dual, data.y)
            primal = epoch_update(primal, data)
            dev = float(np.max(np.abs(dual.train_predictions() - data.x @ primal.w)))
            worst = max(worst, dev)
    ok = worst <= 1e-10
    report(11, "primal-dual consistency", ok, f"worst prediction dev {worst:.2e}")


def test_criterion_12_baseline_proximity():
    data, _ = sample_trig(TrigProblem(d=5, noise_sd=1.0), 200, seed=0)
    rep = baseline_comparison(
        data, KernelSpec("linear"), seeds=[0, 1, 2, 3, 4], max_epochs=100
    )
    kiir, krr = rep["median"]["KIIR"], rep["median"]["KRR"]
    ok = kiir <= 1.2 * krr
    report(12, "KIIR close to tuned KRR", ok, f"median RMSE {kiir:.4f} vs KRR {krr:.4f}")


def _strip_timing(text: str) -> str:
    return "\n".join(l for l in text.splitlines() if '"timing_seconds"' not in l)


def test_criterion_13_determinism():
    verify_req = schemas.VerifyRequest(
        preset="source:r=1",
        epochs=50,
        algebra_trials=10,
        concentration_n=60,
        concentration_trials=100,
        seed=4,
    )
    rates_req = schemas.RatesRequest(
        preset="source:r=1.5", rule="norm:1.5", grid=[32, 128, 1024], replicates=3, seed=4
    )
    pairs = [
        ("verify", ops.run_verify, verify_req),
        ("rates", ops.run_rates, rates_req),
    ]
    stable = True
    for _, fn, req in pairs:
        a = _strip_timing(envelope_json(fn(req)))
        b = _strip_timing(envelope_json(fn(req)))
        stable = stable and (a == b)
    report(13, "byte-identical reports", stable, "verify and rates, timing excluded")
