"""Comparator selectors: S-score rankings and L1-penalised A-learning.

The A-learning fit minimises

    (1/2n) sum_i [Y_i - Ybar - (A_i - pihat)(b0 + b'X_i)]^2 + lam * |b|_1

over a descending lambda grid by cyclic coordinate descent with warm starts.
Covariates are standardised internally; ``b0`` is not penalised.  A fit has
converged when no coordinate moves by more than ``TOL`` in the squared,
variance-weighted sense used by glmnet, relative to the null deviance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .data import Dataset, FittedQModel, VariableSet
from .evaluation import Regime
from .regression import fit_q_model
from .selection import ScoreVector

N_LAMBDA = 100
LAMBDA_MIN_RATIO = 1e-3
TOL = 1e-7
MAX_SWEEPS = 100_000
# path truncation rules, as in glmnet
DEV_MAX = 0.999
DEV_FRAC_MIN = 1e-5
MIN_BEFORE_STOP = 5


def sscore_nonzero_set(scores: ScoreVector, tol: float = 0.0) -> VariableSet:
    """Columns whose S-score exceeds ``tol``, highest score first."""
    s = scores.scores
    return VariableSet(tuple(int(j) for j in scores.ranking if s[j] > tol))


def sscore_topk_regime(d: Dataset, scores: ScoreVector, k: int) -> tuple[VariableSet, FittedQModel]:
    """Refit the Q-model on the ``k`` highest-scoring columns."""
    if not 0 <= k <= d.p:
        raise ValueError(f"k={k} outside [0, {d.p}]")
    chosen = VariableSet(tuple(int(j) for j in scores.ranking[:k]))
    return chosen, fit_q_model(d, chosen)


@numba.njit(cache=True)
def _cd_path(W, w0, r, v, v0, lambdas, thresh, max_sweeps, dev_max, dev_frac_min):
    """Coordinate descent along ``lambdas`` with warm starts and active sets.

    W is the standardised, treatment-centred design (n x p), w0 the
    unpenalised column, r the centred response, v/v0 the mean squares of the
    columns.  A sweep has converged when every ``v_j * (change in b_j)^2``
    is below ``thresh``.  Returns (b0 per lambda, coefficients per lambda, number of
    lambdas fitted, sweeps used).
    """
    n, p = W.shape
    nl = lambdas.shape[0]
    B = np.zeros((nl, p))
    B0 = np.zeros(nl)
    b = np.zeros(p)
    res = r.copy()
    b0 = 0.0
    dev_null = 0.0
    for i in range(n):
        dev_null += r[i] * r[i]
    active = np.zeros(p, dtype=np.bool_)
    total_sweeps = 0
    prev_dev = dev_null
    fitted = 0
    for li in range(nl):
        lam = lambdas[li]
        while True:
            # full sweep over all coordinates
            max_delta = 0.0
            g = 0.0
            for i in range(n):
                g += w0[i] * res[i]
            d0 = g / (n * v0)
            if d0 != 0.0:
                b0 += d0
                for i in range(n):
                    res[i] -= d0 * w0[i]
                if d0 * d0 * v0 > max_delta:
                    max_delta = d0 * d0 * v0
            for j in range(p):
                if v[j] == 0.0:
                    continue
                g = 0.0
                for i in range(n):
                    g += W[i, j] * res[i]
                z = g / n + v[j] * b[j]
                if z > lam:
                    bj = (z - lam) / v[j]
                elif z < -lam:
                    bj = (z + lam) / v[j]
                else:
                    bj = 0.0
                dj = bj - b[j]
                if dj != 0.0:
                    for i in range(n):
                        res[i] -= dj * W[i, j]
                    b[j] = bj
                    delta = dj * dj * v[j]
                    if delta > max_delta:
                        max_delta = delta
                if bj != 0.0:
                    active[j] = True
            total_sweeps += 1
            if max_delta < thresh or total_sweeps >= max_sweeps:
                break
            # iterate on the active set until it settles
            while total_sweeps < max_sweeps:
                max_delta = 0.0
                g = 0.0
                for i in range(n):
                    g += w0[i] * res[i]
                d0 = g / (n * v0)
                if d0 != 0.0:
                    b0 += d0
                    for i in range(n):
                        res[i] -= d0 * w0[i]
                    max_delta = d0 * d0 * v0
                for j in range(p):
                    if not active[j]:
                        continue
                    g = 0.0
                    for i in range(n):
                        g += W[i, j] * res[i]
                    z = g / n + v[j] * b[j]
                    if z > lam:
                        bj = (z - lam) / v[j]
                    elif z < -lam:
                        bj = (z + lam) / v[j]
                    else:
                        bj = 0.0
                    dj = bj - b[j]
                    if dj != 0.0:
                        for i in range(n):
                            res[i] -= dj * W[i, j]
                        b[j] = bj
                        delta = dj * dj * v[j]
                        if delta > max_delta:
                            max_delta = delta
                total_sweeps += 1
                if max_delta < thresh:
                    break
        B[li, :] = b
        B0[li] = b0
        fitted = li + 1
        dev = 0.0
        for i in range(n):
            dev += res[i] * res[i]
        if total_sweeps >= max_sweeps:
            break
        if dev_null > 0.0:
            if 1.0 - dev / dev_null >= dev_max:
                break
            explained = 1.0 - dev / dev_null
            if li >= MIN_BEFORE_STOP - 1 and (prev_dev - dev) / dev_null < dev_frac_min * explained:
                break
        prev_dev = dev
    return B0, B, fitted, total_sweeps


@dataclass(frozen=True, eq=False)
class ALearningProblem:
    """Centred response and standardised design for one training sample."""

    ybar: float
    pihat: float
    mean: np.ndarray
    scale: np.ndarray
    W: np.ndarray
    w0: np.ndarray
    r: np.ndarray

    @classmethod
    def build(cls, X, A, Y) -> "ALearningProblem":
        X = np.asarray(X, dtype=float)
        A = np.asarray(A, dtype=float)
        Y = np.asarray(Y, dtype=float)
        ybar, pihat = float(Y.mean()), float(A.mean())
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        w0 = A - pihat
        W = np.asfortranarray(w0[:, None] * ((X - mean) / scale))
        return cls(ybar, pihat, mean, scale, W, w0, Y - ybar)

    def lambda_max(self) -> float:
        n = self.r.shape[0]
        v0 = float(self.w0 @ self.w0)
        if v0 == 0.0:
            raise ValueError("treatment is constant")
        res = self.r - self.w0 * (self.w0 @ self.r) / v0
        return float(np.max(np.abs(self.W.T @ res)) / n) if self.W.shape[1] else 0.0

    def path(self, lambdas, tol=TOL, max_sweeps=MAX_SWEEPS, truncate=True):
        """Coefficients on the original covariate scale for each fitted lambda."""
        v = np.mean(self.W**2, axis=0)
        v0 = float(np.mean(self.w0**2))
        lambdas = np.asarray(lambdas, dtype=float)
        thresh = tol * max(float(np.mean(self.r**2)), np.finfo(float).tiny)
        B0, B, fitted, _ = _cd_path(
            self.W, self.w0, self.r, v, v0, lambdas, thresh, max_sweeps,
            DEV_MAX if truncate else 2.0, DEV_FRAC_MIN if truncate else -np.inf,
        )
        Bs = B[:fitted] / self.scale
        B0 = B0[:fitted] - Bs @ self.mean
        return lambdas[:fitted], B0, Bs

    def loss(self, X, A, Y, b0, B) -> np.ndarray:
        """Mean A-learning squared loss on (X, A, Y) for each coefficient row."""
        c = b0[:, None] + B @ np.asarray(X, dtype=float).T
        res = (np.asarray(Y) - self.ybar)[None, :] - (np.asarray(A) - self.pihat)[None, :] * c
        return np.mean(res**2, axis=1)


@dataclass(frozen=True, eq=False)
class LassoFit:
    """Chosen A-learning LASSO fit plus the path and CV curve that produced it."""

    intercept_interaction: float
    interaction_coeffs: np.ndarray
    lambda_: float
    cv_curve: tuple[tuple[float, float, float], ...]
    path_lambdas: np.ndarray = field(repr=False)
    path_coeffs: np.ndarray = field(repr=False)
    path_intercepts: np.ndarray = field(repr=False)

    @property
    def selected(self) -> VariableSet:
        return VariableSet(tuple(np.nonzero(self.interaction_coeffs)[0]))


def lambda_grid(lam_max: float, n_lambda: int = N_LAMBDA, ratio: float = LAMBDA_MIN_RATIO):
    if lam_max <= 0:
        return np.zeros(1)
    return lam_max * np.logspace(0.0, np.log10(ratio), n_lambda)


def stratified_folds(treatment, folds: int, seed) -> np.ndarray:
    """Fold label per subject, dealing each arm out round-robin after shuffling."""
    rng = np.random.default_rng(seed)
    a = np.asarray(treatment)
    labels = np.empty(a.shape[0], dtype=np.int64)
    offset = 0
    for arm in (0, 1):
        idx = np.nonzero(a == arm)[0]
        idx = idx[rng.permutation(idx.shape[0])]
        labels[idx] = (np.arange(idx.shape[0]) + offset) % folds
        offset += idx.shape[0]
    return labels


def lasso_alearning_fit(
    d: Dataset, lambda_grid_=None, folds: int = 10, seed=0, tol: float = TOL
) -> LassoFit:
    """Cross-validated L1 A-learning with a sample-mean baseline.

    ``lambda_grid_`` defaults to 100 log-spaced values from the smallest
    all-zero lambda down to 1e-3 of it.  The chosen lambda minimises the
    mean held-out A-learning loss; folds are stratified by arm.
    """
    d.require_both_arms()
    if folds < 2 or d.n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={d.n}")
    X, A, Y = d.covariates, d.treatment, d.outcome
    full = ALearningProblem.build(X, A, Y)
    if np.ptp(Y) == 0:
        zero = np.zeros(d.p)
        b0 = 0.0
        return LassoFit(b0, zero, 0.0, (), np.zeros(1), zero[None, :], np.zeros(1))
    if lambda_grid_ is None:
        grid = lambda_grid(full.lambda_max())
    else:
        grid = np.sort(np.asarray(lambda_grid_, dtype=float))[::-1]
    lams, B0, B = full.path(grid, tol=tol)

    labels = stratified_folds(A, folds, seed)
    losses = []
    n_common = lams.shape[0]
    for f in range(folds):
        test = labels == f
        train = ~test
        prob = ALearningProblem.build(X[train], A[train], Y[train])
        # supplied lambdas are fitted in full, as glmnet does for its CV folds
        _, fb0, fB = prob.path(grid[: lams.shape[0]], tol=tol, truncate=False)
        n_common = min(n_common, fb0.shape[0])
        losses.append(prob.loss(X[test], A[test], Y[test], fb0, fB))
    L = np.vstack([l[:n_common] for l in losses])
    cv_mean = L.mean(axis=0)
    cv_se = L.std(axis=0, ddof=1) / np.sqrt(folds)
    best = int(np.argmin(cv_mean))
    curve = tuple(
        (float(lams[i]), float(cv_mean[i]), float(cv_se[i])) for i in range(n_common)
    )
    return LassoFit(
        intercept_interaction=float(B0[best]),
        interaction_coeffs=B[best].copy(),
        lambda_=float(lams[best]),
        cv_curve=curve,
        path_lambdas=lams,
        path_coeffs=B,
        path_intercepts=B0,
    )


def lasso_regime(fit: LassoFit) -> Regime:
    """Treat when b0 + b'x >= 0 (ties treat)."""
    return Regime.linear(
        fit.intercept_interaction, fit.interaction_coeffs, treat_on_tie=True, provenance="lasso"
    )


def lasso_solution_path(fit: LassoFit) -> list[int]:
    """Columns in order of entry along the lambda path.

    Entry is the largest lambda with a nonzero coefficient; columns entering
    at the same lambda are ordered by coefficient magnitude there.
    """
    B = fit.path_coeffs
    nz = B != 0
    order = []
    seen = np.zeros(B.shape[1], dtype=bool)
    for li in range(B.shape[0]):
        new = np.nonzero(nz[li] & ~seen)[0]
        if new.size:
            mag = np.abs(B[li, new])
            new = new[np.lexsort((new, -mag))]
            order.extend(int(j) for j in new)
            seen[new] = True
    return order
