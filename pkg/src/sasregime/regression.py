"""Least squares for the Q-model design [1, X_M, A, X_M * A]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FittedQModel, VariableSet


@dataclass(frozen=True)
class DesignSpec:
    subset: VariableSet = VariableSet()
    include_treatment: bool = True
    include_interactions: bool = True

    def __post_init__(self):
        if self.include_interactions and not self.include_treatment:
            raise ValueError("interactions require the treatment column")


def build_design(d: Dataset, spec: DesignSpec) -> np.ndarray:
    """Columns ordered [1, X_j1..X_jk, A, X_j1*A..X_jk*A]."""
    spec.subset.check(d.p)
    idx = list(spec.subset.indices)
    Xm = d.covariates[:, idx]
    cols = [np.ones((d.n, 1)), Xm]
    if spec.include_treatment:
        a = d.treatment.astype(float)[:, None]
        cols.append(a)
        if spec.include_interactions:
            cols.append(Xm * a)
    return np.hstack(cols)


def rank_tolerance(design: np.ndarray, smax: float) -> float:
    n, m = design.shape
    return max(n, m) * np.finfo(float).eps * smax


def ols_fit(design, y) -> tuple[np.ndarray, bool]:
    """Minimum-norm least-squares coefficients and a rank-deficiency flag.

    Uses the SVD-based LAPACK driver, so rank-deficient designs still get
    the minimum-norm solution.  A singular value counts as zero below
    ``max(n, m) * eps * s_max``.
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.ndim != 2:
        raise ValueError("design must be a matrix")
    n, m = design.shape
    if n == 0:
        raise ValueError("cannot fit a model with no observations")
    if y.shape != (n,):
        raise ValueError(f"response has shape {y.shape}, expected ({n},)")
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in design or response")
    rcond = max(n, m) * np.finfo(float).eps
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=rcond)
    return coef, bool(rank < m)


def fit_q_model(d: Dataset, subset: VariableSet) -> FittedQModel:
    d.require_both_arms()
    subset = subset if isinstance(subset, VariableSet) else VariableSet(tuple(subset))
    D = build_design(d, DesignSpec(subset))
    coef, deficient = ols_fit(D, d.outcome)
    k = len(subset)
    return FittedQModel(
        subset=subset,
        intercept=float(coef[0]),
        main_coeffs=coef[1 : 1 + k],
        treat_coeff=float(coef[1 + k]),
        interaction_coeffs=coef[2 + k :],
        rank_deficient=deficient,
    )


def predict_q(m: FittedQModel, x, a: int) -> float:
    """Fitted mean outcome for one covariate row ``x`` under action ``a``.

    ``x`` is either a full covariate row (indexed by the model's subset) or
    a mapping from column index to value.
    """
    vals = []
    for j in m.subset:
        try:
            vals.append(float(x[j]))
        except (KeyError, IndexError):
            raise ValueError(f"covariate {j} missing from input row") from None
    v = np.asarray(vals)
    out = m.intercept + float(v @ m.main_coeffs)
    if a:
        out += m.treat_coeff + float(v @ m.interaction_coeffs)
    return out


def predict_q_rows(m: FittedQModel, X, a) -> np.ndarray:
    """Vectorised :func:`predict_q` over the rows of ``X``; ``a`` may be an array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xm = X[:, list(m.subset.indices)]
    a = np.broadcast_to(np.asarray(a, dtype=float), (X.shape[0],))
    return m.intercept + Xm @ m.main_coeffs + a * (m.treat_coeff + Xm @ m.interaction_coeffs)


@dataclass(frozen=True)
class ArmLine:
    arm: int
    intercept: float
    slope: float
    n: int


def arm_regressions(d: Dataset, j: int) -> tuple[ArmLine, ArmLine]:
    """Simple regression of Y on X_j separately within each arm.

    These are the fitted lines of a marginal interaction plot; the lines
    cross inside the data range when X_j interacts qualitatively with A.
    """
    if not 0 <= j < d.p:
        raise IndexError(f"column index {j} out of range for p={d.p}")
    out = []
    for arm in (0, 1):
        mask = d.treatment == arm
        if not np.any(mask):
            raise ValueError(f"arm {arm} is empty")
        x = d.covariates[mask, j]
        D = np.column_stack([np.ones(x.shape[0]), x])
        coef, _ = ols_fit(D, d.outcome[mask])
        out.append(ArmLine(arm, float(coef[0]), float(coef[1]), int(mask.sum())))
    return out[0], out[1]
