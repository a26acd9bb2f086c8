import math

import numpy as np
import pytest

from iir.linear import IterState, epoch_update, resolve_gamma
from iir.model import ContractViolation, DataSet
from iir.stopping import (
    StoppingRule,
    check_consistency_rate,
    holdout_select,
    parse_rule,
    stopping_time,
)


def test_parse_rule_variants():
    assert parse_rule("fixed:7") == StoppingRule("fixed", t_fixed=7)
    assert parse_rule("norm:1.5").variant == "norm_rule"
    assert parse_rule("risk:1.0").variant == "risk_attainable"
    assert parse_rule("nonattainable").variant == "risk_nonattainable"
    h = parse_rule("holdout:0.25:50")
    assert h.validation_fraction == 0.25 and h.max_epochs == 50
    assert parse_rule("holdout").validation_fraction == 0.2
    with pytest.raises(ContractViolation):
        parse_rule("bogus:1")


def test_rule_validation():
    with pytest.raises(ContractViolation):
        StoppingRule("norm_rule", r=0.5)  # needs r strictly above 1/2
    with pytest.raises(ContractViolation):
        StoppingRule("risk_attainable", r=0.3)
    with pytest.raises(ContractViolation):
        StoppingRule("fixed", t_fixed=0)
    with pytest.raises(ContractViolation):
        StoppingRule("holdout", validation_fraction=1.0)


def test_stopping_time_formulas():
    # norm rule: ceil(n^{1/(2r+1)})
    assert stopping_time(parse_rule("norm:1.5"), 256) == 4  # 256^{1/4}
    assert stopping_time(parse_rule("norm:1.5"), 257) == 5
    # risk attainable: ceil(n^{1/(2(1+r))})
    assert stopping_time(parse_rule("risk:1"), 256) == 4
    assert stopping_time(parse_rule("risk:1"), 625) == 5
    # nonattainable: ceil(n^{1/3})
    assert stopping_time(parse_rule("nonattainable"), 1000) == 10
    assert stopping_time(parse_rule("nonattainable"), 1001) == 11
    assert stopping_time(parse_rule("fixed:12"), 5) == 12
    assert stopping_time(parse_rule("holdout:0.2:33"), 100) == 33


def test_stopping_time_float_snap():
    # float powers landing epsilon above an exact integer root must not be
    # ceiled up: 3125^{1/5} evaluates to 5.000000000000001
    assert float(3125) ** 0.2 > 5.0
    # norm rule with r=2 has exponent 1/5
    assert stopping_time(StoppingRule("norm_rule", r=2.0), 3125) == 5


def test_consistency_rate_window():
    assert check_consistency_rate(parse_rule("norm:1.5"))  # e = 1/4
    assert check_consistency_rate(parse_rule("risk:1"))  # e = 1/4
    # the boundary e = 1/3 fails: t^3 log n / n -> log n
    assert not check_consistency_rate(parse_rule("nonattainable"))
    assert not check_consistency_rate(parse_rule("fixed:5"))  # e = 0
    with pytest.raises(ContractViolation):
        check_consistency_rate(parse_rule("holdout"))


def iir_learner(train, max_epochs):
    g = resolve_gamma("auto", train)
    state = IterState(w=np.zeros(train.d), gamma=g)
    for _ in range(max_epochs):
        state = epoch_update(state, train)
        w = state.w
        yield lambda X, w=w: np.atleast_2d(X) @ w


def test_holdout_select_finds_validation_minimum():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((120, 4))
    w_true = np.array([1.0, -2.0, 0.5, 0.0])
    y = x @ w_true + 0.5 * rng.standard_normal(120)
    data = DataSet(x, y)
    rule = parse_rule("holdout:0.25:40")
    t_sel, curve = holdout_select(data, iir_learner, rule, seed=1)
    assert len(curve) == 40
    errors = [e for _, e in curve]
    assert 1 <= t_sel <= 40
    assert errors[t_sel - 1] == min(errors)
    # smallest minimizer wins ties
    assert all(errors[t] > errors[t_sel - 1] for t in range(t_sel - 1))


def test_holdout_select_rejects_degenerate_split():
    data = DataSet(np.eye(2), np.array([1.0, 2.0]))
    rule = StoppingRule("holdout", validation_fraction=0.05, max_epochs=5)
    with pytest.raises(ContractViolation):
        holdout_select(data, iir_learner, rule)


def test_holdout_select_requires_holdout_rule():
    data = DataSet(np.eye(4), np.ones(4))
    with pytest.raises(ContractViolation):
        holdout_select(data, iir_learner, parse_rule("fixed:3"))


def test_holdout_select_is_seed_deterministic():
    rng = np.random.default_rng(3)
    data = DataSet(rng.standard_normal((50, 3)), rng.standard_normal(50))
    rule = parse_rule("holdout:0.2:10")
    a = holdout_select(data, iir_learner, rule, seed=7)
    b = holdout_select(data, iir_learner, rule, seed=7)
    assert a == b
