import mpmath
import numpy as np
import pytest

from sasregime.data import Dataset, VariableSet
from sasregime.regression import (
    DesignSpec,
    arm_regressions,
    build_design,
    fit_q_model,
    ols_fit,
    predict_q,
    predict_q_rows,
)
from sasregime.data import FittedQModel

from conftest import make_dataset


def normal_equations_oracle(D, y, dps=50):
    """Solve D'D b = D'y in 50-digit arithmetic."""
    with mpmath.workdps(dps):
        M = mpmath.matrix(D.tolist())
        v = mpmath.matrix(y.tolist())
        b = mpmath.lu_solve(M.T * M, M.T * v)
        return np.array([float(x) for x in b])


def test_design_layout():
    d = Dataset([[1.0], [2.0]], [0, 1], [0.0, 0.0])
    D = build_design(d, DesignSpec(VariableSet((0,))))
    np.testing.assert_array_equal(D, [[1, 1, 0, 0], [1, 2, 1, 2]])
    D0 = build_design(d, DesignSpec(VariableSet(), include_interactions=False))
    np.testing.assert_array_equal(D0, [[1, 0], [1, 1]])
    d2 = make_dataset(n=10, p=3)
    assert build_design(d2, DesignSpec(VariableSet((0, 1)))).shape == (10, 6)
    with pytest.raises(ValueError):
        DesignSpec(VariableSet(), include_treatment=False, include_interactions=True)
    with pytest.raises(IndexError):
        build_design(d, DesignSpec(VariableSet((3,))))


def test_identity_design():
    coef, deficient = ols_fit(np.eye(3), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(coef, [1, 2, 3], rtol=0, atol=1e-14)
    assert not deficient


def test_ols_errors():
    with pytest.raises(ValueError):
        ols_fit(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        ols_fit(np.ones((3, 1)), np.array([1.0, np.nan, 2.0]))
    with pytest.raises(ValueError):
        ols_fit(np.ones((3, 1)), np.ones(2))


def test_matches_extended_precision_normal_equations():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        n, m = rng.integers(20, 60), rng.integers(2, 7)
        D = rng.standard_normal((n, m))
        y = rng.standard_normal(n)
        coef, deficient = ols_fit(D, y)
        ref = normal_equations_oracle(D, y)
        assert not deficient
        worst = max(worst, np.max(np.abs(coef - ref)) / np.max(np.abs(ref)))
    assert worst < 1e-8


def test_duplicate_column_keeps_predictions():
    rng = np.random.default_rng(2)
    D = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    coef, deficient = ols_fit(D, y)
    Dd = np.column_stack([D, D[:, 1]])
    coef_d, deficient_d = ols_fit(Dd, y)
    assert deficient_d and not deficient
    assert np.all(np.isfinite(coef_d))
    np.testing.assert_allclose(Dd @ coef_d, D @ coef, atol=1e-10)
    # minimum norm splits the duplicated weight evenly
    assert coef_d[1] == pytest.approx(coef_d[3], abs=1e-10)


def test_constant_outcome():
    d = make_dataset(n=30, p=2)
    d = Dataset(d.covariates, d.treatment, np.full(30, 2.0))
    m = fit_q_model(d, VariableSet((0, 1)))
    assert m.intercept == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(
        [*m.main_coeffs, m.treat_coeff, *m.interaction_coeffs], 0.0, atol=1e-12
    )


def test_exact_recovery_and_prediction():
    x = np.linspace(-2, 2, 10)
    a = np.array([0, 1] * 5)
    y = 1 + x + a * (0.5 - x)
    m = fit_q_model(Dataset(x[:, None], a, y), VariableSet((0,)))
    got = [m.intercept, m.main_coeffs[0], m.treat_coeff, m.interaction_coeffs[0]]
    np.testing.assert_allclose(got, [1, 1, 0.5, -1], atol=1e-8)
    model = FittedQModel(VariableSet((0,)), 1.0, np.array([1.0]), 0.5, np.array([-1.0]))
    assert predict_q(model, [0.25], 1) == pytest.approx(1.5, abs=1e-15)


def test_predict_conventions():
    zero = FittedQModel(VariableSet((1,)), 0.0, np.zeros(1), 0.0, np.zeros(1))
    assert predict_q(zero, [3.0, -2.0], 1) == 0.0
    m = FittedQModel(VariableSet((1,)), 1.0, np.array([2.0]), 5.0, np.array([7.0]))
    m2 = FittedQModel(VariableSet((1,)), 1.0, np.array([2.0]), -9.0, np.array([0.0]))
    assert predict_q(m, [0.0, 1.5], 0) == predict_q(m2, [0.0, 1.5], 0) == 4.0
    assert predict_q(m, {1: 1.5}, 1) == pytest.approx(4.0 + 5.0 + 10.5)
    with pytest.raises(ValueError):
        predict_q(m, {0: 1.0}, 1)


def test_empty_subset_gives_group_means():
    d = make_dataset(n=40, p=2, seed=5)
    m = fit_q_model(d, VariableSet())
    y, a = d.outcome, d.treatment
    assert m.intercept == pytest.approx(y[a == 0].mean(), abs=1e-12)
    assert m.treat_coeff == pytest.approx(y[a == 1].mean() - y[a == 0].mean(), abs=1e-12)


def test_single_arm_is_rejected():
    d = Dataset(np.ones((4, 1)), [1, 1, 1, 1], [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        fit_q_model(d, VariableSet((0,)))


@pytest.mark.parametrize("seed", range(5))
def test_residual_orthogonal_to_design(seed):
    d = make_dataset(n=50, p=5, seed=seed)
    sub = VariableSet((4, 0, 2))
    m = fit_q_model(d, sub)
    D = build_design(d, DesignSpec(sub))
    fitted = np.where(
        d.treatment == 1, predict_q_rows(m, d.covariates, 1), predict_q_rows(m, d.covariates, 0)
    )
    r = d.outcome - fitted
    bound = 1e-6 * np.linalg.norm(d.outcome) * np.linalg.norm(D, axis=0)
    assert np.all(np.abs(D.T @ r) < bound)


def test_permutation_equivariance():
    d = make_dataset(n=50, p=5, seed=3)
    m1 = fit_q_model(d, VariableSet((0, 3, 1)))
    m2 = fit_q_model(d, VariableSet((1, 0, 3)))
    perm = [2, 0, 1]
    np.testing.assert_allclose(m2.main_coeffs, m1.main_coeffs[perm], atol=1e-10)
    np.testing.assert_allclose(m2.interaction_coeffs, m1.interaction_coeffs[perm], atol=1e-10)
    np.testing.assert_allclose(m2.contrast(d.covariates), m1.contrast(d.covariates), atol=1e-10)


def test_arm_regressions_match_per_arm_fit():
    d = make_dataset(n=80, p=2, seed=9)
    l0, l1 = arm_regressions(d, 1)
    for line in (l0, l1):
        rows = d.treatment == line.arm
        slope, icpt = np.polyfit(d.covariates[rows, 1], d.outcome[rows], 1)
        assert line.slope == pytest.approx(slope, abs=1e-10)
        assert line.intercept == pytest.approx(icpt, abs=1e-10)
        assert line.n == rows.sum()
