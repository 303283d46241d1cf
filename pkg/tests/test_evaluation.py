import math

import numpy as np
import pytest

from sasregime.data import Dataset, FittedQModel, VariableSet
from sasregime.evaluation import (
    Regime,
    bootstrap_value_diff,
    error_rate,
    ipw_value,
    mc_value,
    mean_skipping_undefined,
    regime_from_q,
    tdr_tp,
)
from sasregime.simgen import gen_covariates, generate, make_spec, true_regime


def _q(treat, inter, subset=(0,)):
    k = len(subset)
    return FittedQModel(VariableSet(subset), 0.0, np.zeros(k), treat, np.asarray(inter, float))


def test_regime_from_q_conventions():
    assert np.all(regime_from_q(_q(0.1, [], ())).actions(np.zeros((3, 2))) == 1)
    r = regime_from_q(_q(0.0, [1.0]))
    assert r([0.0]) == 0 and r([1e-9]) == 1
    m = _q(0.1, [1.0, -0.9, 0.8], (0, 8, 9))
    spec = make_spec("I", "sparse3", 0.2, "rct", n=10, p=12)
    X = gen_covariates(500, 12, 0.2, 0)
    assert error_rate(regime_from_q(m), spec.beta_array, X) == 0.0


def test_constant_regime_value():
    spec = make_spec("I", "sparse3", 0.5, "rct", n=10, p=20)
    v = mc_value(Regime.constant(1), spec, reps=200_000, seed=1)
    assert v == pytest.approx(1.1, abs=0.02)
    assert mc_value(Regime.constant(0), spec, reps=200_000, seed=1) == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        mc_value(Regime.constant(1), spec, reps=0)


def test_true_regime_dominates_random_regimes():
    spec = make_spec("I", "sparse3", 0.2, "rct", n=10, p=20)
    best = mc_value(true_regime(spec), spec, reps=10_000, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(20):
        idx = rng.choice(20, size=3, replace=False)
        r = Regime(rng.normal(), tuple(idx), tuple(rng.normal(size=3)))
        assert mc_value(r, spec, reps=10_000, seed=3) <= best
    flipped = true_regime(spec).complement()
    assert mc_value(flipped, spec, reps=10_000, seed=3) <= best


def test_error_rate_identities():
    spec = make_spec("I", "sparse8", 0.5, "rct", n=10, p=45)
    X = gen_covariates(5000, 45, 0.5, 1)
    truth = true_regime(spec)
    assert error_rate(truth, spec.beta_array, X) == 0.0
    assert error_rate(truth.complement(), spec.beta_array, X) == 1.0
    rng = np.random.default_rng(2)
    for _ in range(20):
        r = Regime(rng.normal(), (0, 3, 8), tuple(rng.normal(size=3)), bool(rng.integers(2)))
        e = error_rate(r, spec.beta_array, X) + error_rate(r.complement(), spec.beta_array, X)
        assert e == 1.0
    # ties: the complement of a tie-treating rule holds back on ties
    tie = Regime(0.0)
    assert tie([1.0]) == 0 and tie.complement()([1.0]) == 1
    with pytest.raises(ValueError):
        error_rate(truth, spec.beta_array, np.zeros((0, 45)))


def test_tdr_tp():
    assert tdr_tp(VariableSet((0, 8, 9)), VariableSet((0, 8, 9))) == (1.0, 3)
    assert tdr_tp([1, 2], [0, 8, 9]) == (0.0, 0)
    tdr, tp = tdr_tp([], [0])
    assert math.isnan(tdr) and tp == 0
    rng = np.random.default_rng(0)
    for _ in range(50):
        sel = rng.choice(30, size=rng.integers(1, 10), replace=False)
        tdr, tp = tdr_tp(sel, [0, 8, 9, 20])
        assert tdr * len(sel) == pytest.approx(tp, abs=1e-12)
    assert mean_skipping_undefined([0.5, math.nan, 1.0]) == 0.75
    assert math.isnan(mean_skipping_undefined([math.nan]))


def test_ipw_hand_example():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    Y = np.array([1.0, 2.0, 3.0, 6.0])
    rule = Regime(-0.5, (0,), (1.0,))  # treat when x > 0.5
    d = Dataset(X, np.array([0, 1, 1, 1]), Y)
    assert [rule(x) for x in X] == [0, 1, 1, 1]
    # every subject follows the rule, each term is Y / 0.5
    assert ipw_value(d, rule, 0.5) == pytest.approx(2 * Y.mean())
    assert ipw_value(d, rule.complement(), 0.5) == 0.0
    half = Dataset(X, np.array([0, 1, 0, 1]), Y)
    assert ipw_value(half, rule, 0.5) == pytest.approx((1 + 2 + 6) / 0.5 / 4)
    with pytest.raises(ValueError):
        ipw_value(d, rule, 1.0)


def test_ipw_permutation_invariance_and_consistency():
    spec = make_spec("I", "sparse3", 0.2, "rct", n=10_000, p=12)
    d = generate(spec, 5)
    prop = np.full(d.n, 0.5)
    v = ipw_value(d, Regime.constant(1), prop)
    perm = np.random.default_rng(0).permutation(d.n)
    dp = d.subset_rows(perm)
    assert ipw_value(dp, Regime.constant(1), prop) == pytest.approx(v, rel=1e-12)
    terms = d.outcome * (d.treatment == 1) / 0.5
    se = terms.std(ddof=1) / np.sqrt(d.n)
    assert abs(v - 1.1) < 2 * se


def test_bootstrap_identities():
    spec = make_spec("I", "sparse3", 0.2, "rct", n=300, p=12)
    d = generate(spec, 1)
    r = true_regime(spec)
    diff, lo, hi = bootstrap_value_diff(d, r, r, 0.5, B=200, seed=0)
    assert diff == 0.0 and lo <= 0.0 <= hi
    a = bootstrap_value_diff(d, r, Regime.constant(0), 0.5, B=200, seed=4)
    b = bootstrap_value_diff(d, r, Regime.constant(0), 0.5, B=200, seed=4)
    assert a == b
    with pytest.raises(ValueError):
        bootstrap_value_diff(d, r, r, 0.5, B=50)


def test_bootstrap_power():
    """Regime A beats B by one outcome sd; the CI should exclude 0 nearly always."""
    excluded = 0
    for rep in range(100):
        rng = np.random.default_rng(rep)
        n = 500
        X = rng.standard_normal((n, 1))
        A = rng.integers(0, 2, n)
        Y = A * 1.0 + rng.standard_normal(n)
        d = Dataset(X, A, Y)
        _, lo, hi = bootstrap_value_diff(d, Regime.constant(1), Regime.constant(0), 0.5, B=500, seed=rep)
        excluded += lo > 0
    assert excluded >= 90
