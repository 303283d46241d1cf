import numpy as np
import pytest

from sasregime.data import Observational, Randomized
from sasregime.simgen import (
    child_seed,
    gen_covariates,
    gen_outcome,
    gen_treatment,
    generate,
    logistic,
    make_spec,
    propensity,
    scenario,
    scenario_keys,
    true_regime,
)


def test_independent_columns_at_rho_zero():
    X = gen_covariates(10_000, 6, 0.0, 1)
    C = np.corrcoef(X, rowvar=False)
    assert np.all(np.abs(np.diag(C, 1)) < 3 / np.sqrt(10_000) * np.sqrt(2))
    assert np.all(np.abs(X.var(axis=0) - 1) < 0.05)


def test_ar1_lag_two_correlation():
    X = gen_covariates(10_000, 6, 0.8, 2)
    C = np.corrcoef(X, rowvar=False)
    assert np.all(np.abs(np.diag(C, 2) - 0.64) < 0.03)
    assert np.all(np.abs(X.var(axis=0) - 1) < 0.05)


def test_covariance_fidelity():
    X = gen_covariates(100_000, 5, 0.5, 3)
    C = np.corrcoef(X, rowvar=False)
    lag = np.abs(np.subtract.outer(np.arange(5), np.arange(5)))
    assert np.max(np.abs(C - 0.5**lag)) < 0.01


def test_covariates_are_prefix_consistent_and_deterministic():
    a = gen_covariates(50, 10, 0.5, 7)
    b = gen_covariates(50, 40, 0.5, 7)
    np.testing.assert_array_equal(a, b[:, :10])
    with pytest.raises(ValueError):
        gen_covariates(5, 5, 1.0, 0)


def test_randomized_arms_balanced_and_ignorable():
    X = gen_covariates(10_000, 5, 0.2, 4)
    A = gen_treatment(X, Randomized(0.5), 5)
    assert abs(A.mean() - 0.5) < 0.015
    corr = [np.corrcoef(A, X[:, j])[0, 1] for j in range(5)]
    assert np.max(np.abs(corr)) < 3 / np.sqrt(10_000)


def test_observational_propensity():
    x0 = np.zeros((1, 30))
    assert propensity(x0, Observational())[0] == pytest.approx(logistic(-0.2))
    assert logistic(-0.2) == pytest.approx(0.4502, abs=5e-5)
    X = gen_covariates(10_000, 30, 0.2, 6)
    frac = gen_treatment(X, Observational(), 7).mean()
    assert 0.55 < frac < 0.80
    with pytest.raises(ValueError):
        propensity(np.zeros((2, 10)), Observational())


@pytest.mark.parametrize("model,expected", [("I", 1.0), ("II", 1.0), ("III", 1.25)])
def test_outcome_at_origin(model, expected):
    spec = make_spec(model, "sparse3", 0.2, "rct", n=1, p=12)
    x = np.zeros((1, 12))
    assert gen_outcome(x, np.array([0]), spec, 0, noise=False)[0] == pytest.approx(expected)
    assert gen_outcome(x, np.array([1]), spec, 0, noise=False)[0] == pytest.approx(expected + 0.1)


def test_noise_has_stated_sd():
    spec = make_spec("I", "sparse3", 0.2, "rct", n=20_000, p=12)
    X = gen_covariates(20_000, 12, 0.2, 1)
    A = np.zeros(20_000, dtype=int)
    e = gen_outcome(X, A, spec, 2) - gen_outcome(X, A, spec, 2, noise=False)
    assert e.std() == pytest.approx(0.5, abs=0.01)


def test_noiseless_contrast_recovers_beta():
    spec = make_spec("II", "sparse8", 0.5, "rct", n=120, p=45)
    X = gen_covariates(120, 45, 0.5, 3)
    A = np.ones(120, dtype=int)
    y1 = gen_outcome(X, A, spec, 0, noise=False)
    y0 = gen_outcome(X, 0 * A, spec, 0, noise=False)
    D = np.column_stack([np.ones(120), X])
    coef = np.linalg.lstsq(D, y1 - y0, rcond=None)[0]
    np.testing.assert_allclose(coef, spec.beta_array, atol=1e-10)


def test_sparse_coefficients_use_one_based_labels():
    spec = make_spec("I", "sparse8", 0.2, "rct", n=10, p=50)
    b = spec.beta_array
    assert b[0] == 0.1 and b[1] == 1 and b[9] == -0.9 and b[10] == 0.8
    assert b[22] == 1.5 and b[30] == -2 and b[40] == 3
    assert list(spec.important) == [0, 8, 9, 19, 21, 29, 34, 39]
    assert spec.gamma2[0] == 1 and spec.gamma2[3] == -1 and spec.gamma2[9] == 1
    with pytest.raises(ValueError):
        make_spec("I", "sparse8", 0.2, "rct", n=10, p=30)


def test_true_regime_examples():
    spec = make_spec("I", "sparse3", 0.2, "rct", n=10, p=12)
    r = true_regime(spec)
    x = np.zeros(12)
    assert r(x) == 1
    x[0] = -1
    assert r(x) == 0


def test_scenario_keys():
    spec = scenario("III-sparse8-rho08-obs", n=30, p=60)
    assert spec.model == "III" and spec.rho == 0.8 and isinstance(spec.assignment, Observational)
    assert len(scenario_keys()) == 36
    for bad in ("IV-sparse3-rho02-rct", "I-sparse3-rho03-rct"):
        with pytest.raises(KeyError):
            scenario(bad)


def test_seed_determinism_and_stream_independence():
    spec = scenario("I-sparse3-rho02-rct", n=50, p=30)
    a, b = generate(spec, 11), generate(spec, 11)
    assert a == b
    assert not np.array_equal(generate(spec, 12).covariates, a.covariates)
    s1 = child_seed(5, 0, 3)
    s2 = child_seed(5, 0, 3)
    assert np.random.default_rng(s1).random() == np.random.default_rng(s2).random()
    assert np.random.default_rng(child_seed(5, 0, 4)).random() != np.random.default_rng(s1).random()
