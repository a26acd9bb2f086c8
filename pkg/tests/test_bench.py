import numpy as np
import pytest

from iir.bench import (
    ExperimentConfig,
    _run_iir_replicates,
    algebra_checks,
    baseline_comparison,
    concentration_frequencies,
    error_curve,
    estimate_rate,
    fit_loglog,
    max_workers,
    verify_bounds,
)
from iir.kernels import parse_kernel
from iir.linear import IterState, epoch_update
from iir.model import ContractViolation, DataSet
from iir.stopping import parse_rule
from iir.synth import SpectrumSpec, geometric_spectrum, make_source_problem, parse_preset, sample_trig, TrigProblem


def test_max_workers_env(monkeypatch):
    monkeypatch.delenv("IIR_THREADS", raising=False)
    assert max_workers() == 1
    monkeypatch.setenv("IIR_THREADS", "4")
    assert max_workers() == 4
    monkeypatch.setenv("IIR_THREADS", "junk")
    assert max_workers() == 1
    monkeypatch.setenv("IIR_THREADS", "-2")
    assert max_workers() == 1


def test_experiment_config_validation():
    with pytest.raises(ContractViolation):
        ExperimentConfig(replicates=0)
    with pytest.raises(ContractViolation):
        ExperimentConfig(grid=(10, 10))


def test_fit_loglog_recovers_planted_slope():
    ns = np.array([100, 200, 400, 800])
    errors = 3.0 * ns ** (-0.5)
    est = fit_loglog(ns, errors)
    assert est.slope == pytest.approx(-0.5, abs=1e-12)
    assert est.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert est.stderr < 1e-10
    with pytest.raises(ContractViolation):
        fit_loglog([10, 100], [1.0, 0.1])
    with pytest.raises(ContractViolation):
        fit_loglog([10, 100, 1000], [1.0, 0.0, 0.1])


def test_run_iir_replicates_agrees_with_epoch_update():
    rng = np.random.default_rng(0)
    R, n, d = 4, 13, 3
    xs = rng.standard_normal((R, n, d))
    ys = rng.standard_normal((R, n))
    gamma, epochs = 0.05, 3
    w = _run_iir_replicates(xs, ys, gamma, epochs)
    for r in range(R):
        state = IterState(w=np.zeros(d), gamma=gamma)
        for _ in range(epochs):
            state = epoch_update(state, DataSet(xs[r], ys[r]))
        assert np.allclose(w[r], state.w, atol=1e-13)


def test_estimate_rate_validation():
    prob = parse_preset("source:r=1.5")
    rule = parse_rule("norm:1.5")
    with pytest.raises(ContractViolation):
        estimate_rate(prob, rule, [100, 200], replicates=2)  # under 1.5 decades
    with pytest.raises(ContractViolation):
        estimate_rate(prob, rule, [200, 100, 6400], replicates=2)
    with pytest.raises(ContractViolation):
        estimate_rate(prob, rule, [100, 400, 6400], replicates=2, mode="other")
    nonatt = parse_preset("source:r=0.25")
    with pytest.raises(ContractViolation):
        estimate_rate(nonatt, parse_rule("nonattainable"), [100, 400, 6400], mode="norm")


def test_estimate_rate_small_run_structure():
    prob = parse_preset("source:r=1.5")
    rule = parse_rule("norm:1.5")
    out = estimate_rate(prob, rule, [32, 128, 1024], replicates=3, seed=0)
    assert set(out) >= {"slope", "stderr", "grid", "stop_epochs", "mean_errors"}
    assert out["stop_epochs"] == [3, 4, 6]  # ceil(n^{1/4})
    assert all(e > 0 for e in out["mean_errors"])
    # deterministic for a fixed seed
    again = estimate_rate(prob, rule, [32, 128, 1024], replicates=3, seed=0)
    assert out == again


def test_estimate_rate_thread_count_does_not_change_results(monkeypatch):
    prob = parse_preset("source:r=1.5")
    rule = parse_rule("norm:1.5")
    sequential = estimate_rate(prob, rule, [32, 128, 1024], replicates=3, seed=0)
    monkeypatch.setenv("IIR_THREADS", "4")
    threaded = estimate_rate(prob, rule, [32, 128, 1024], replicates=3, seed=0)
    assert sequential == threaded


def test_verify_bounds_reports_violations_for_wrong_constants():
    # shrinking the generator norm fed to the bound makes the check fail,
    # confirming the harness can actually reject
    prob = parse_preset("source:r=1.5")
    ok = verify_bounds(prob, epochs=50)
    assert ok["pass"]
    import dataclasses
    broken = dataclasses.replace(prob, g_norm=prob.g_norm / 100.0)
    assert not verify_bounds(broken, epochs=50)["pass"]


def test_verify_bounds_nonattainable_skips_distance():
    prob = parse_preset("source:r=0.25")
    rep = verify_bounds(prob, epochs=50)
    assert not rep["bounds"]["distance_to_minimizer"]["applicable"]
    assert rep["pass"]


def test_concentration_frequencies_validation():
    dist = parse_preset("source:r=1").distribution
    with pytest.raises(ContractViolation):
        concentration_frequencies(dist, n=50, delta=0.1, trials=10)
    with pytest.raises(ContractViolation):
        concentration_frequencies(dist, n=50, delta=1.5, trials=100)


def test_concentration_frequencies_small_run():
    dist = parse_preset("source:r=1,d=6").distribution
    rep = concentration_frequencies(dist, n=50, delta=0.1, trials=100, seed=0)
    assert set(rep["frequencies"]) == {
        "cov_operator",
        "output_moment",
        "A_correction",
        "b_correction",
    }
    assert all(0 <= f <= 1 for f in rep["frequencies"].values())
    assert all(t > 0 for t in rep["thresholds"].values())


def test_algebra_checks_pass_and_report_worst():
    rep = algebra_checks(seed=0, trials=20)
    assert rep["pass"]
    assert rep["worst"]["epoch_map_residual"] <= 1e-10
    assert rep["worst"]["contraction_norm"] <= 1.0 + 1e-12


def test_error_curve_shape_and_determinism():
    data, w_star = sample_trig(TrigProblem(d=4), 60, seed=0)
    test, _ = sample_trig(TrigProblem(d=4, w_star=w_star), 40, seed=99)
    rows = error_curve(data, test, epochs=7, seed=1)
    assert len(rows) == 7
    assert rows[0][0] == 1 and rows[-1][0] == 7
    assert rows == error_curve(data, test, epochs=7, seed=1)
    # kernelized run with the matching dictionary gives finite errors too
    scalar_train = DataSet(np.linspace(0, 1, 30)[:, None], np.sin(np.linspace(0, 1, 30)))
    scalar_test = DataSet(np.linspace(0, 1, 10)[:, None], np.sin(np.linspace(0, 1, 10)))
    krows = error_curve(scalar_train, scalar_test, epochs=3, kernel=parse_kernel("gaussian:0.3"))
    assert len(krows) == 3


def test_baseline_comparison_structure():
    data, _ = sample_trig(TrigProblem(d=4), 80, seed=0)
    rep = baseline_comparison(data, parse_kernel("linear"), seeds=[0, 1, 2], max_epochs=20)
    assert set(rep["median"]) == {"KIIR", "KIR", "KRR"}
    assert rep["metric"] == "RMSE"
    assert len(rep["per_seed"]) == 3
    for row in rep["per_seed"]:
        assert row["KIIR"]["stopped_epoch"] >= 1
        assert row["KRR"]["lambda"] > 0
