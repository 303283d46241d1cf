"""S-scores and sequential advantage selection (SAS).

Scores and advantages compare the fitted outcome under the best action
with the fitted outcome under a reference action.  With Q-model contrast
``c(x) = E(Y|x,1) - E(Y|x,0)`` and reference action ``a_ref`` the per-subject
gain is ``c * (1(c > 0) - a_ref)``, which is never negative.

Ties between actions go to action 0; ties between candidate covariates go
to the smallest column index.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .data import Dataset, FittedQModel, SelectionTrace, Step, VariableSet
from .regression import build_design, DesignSpec, fit_q_model, predict_q

log = logging.getLogger(__name__)

DEFAULT_CUTOFF = 0.01


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    basis: str
    ranking: np.ndarray

    @property
    def clamped(self) -> np.ndarray:
        return np.maximum(self.scores, 0.0)


def _gain(contrast: np.ndarray, a_ref) -> np.ndarray:
    return contrast * ((contrast > 0).astype(float) - a_ref)


def treatment_fraction(d: Dataset) -> float:
    return float(np.mean(d.treatment))


def baseline_policy(d: Dataset, pi: float | None = None) -> tuple[int, float]:
    """Best covariate-free action and its gain over random assignment.

    Returns ``(a_opt0, S0)`` where ``a_opt0`` is the arm with the larger
    sample-mean outcome (arm 0 on a tie) and
    ``S0 = mean(best arm) - [pi * mean(arm 1) + (1 - pi) * mean(arm 0)]``.
    ``pi`` defaults to the observed treatment fraction.
    """
    d.require_both_arms()
    if pi is None:
        pi = treatment_fraction(d)
    if not 0.0 <= pi <= 1.0:
        raise ValueError("pi must lie in [0, 1]")
    y, a = d.outcome, d.treatment
    m1 = float(np.mean(y[a == 1]))
    m0 = float(np.mean(y[a == 0]))
    a_opt = 1 if m1 > m0 else 0
    s0 = max(m1, m0) - (pi * m1 + (1.0 - pi) * m0)
    return a_opt, max(s0, 0.0)


def closed_form_score(treat_coeff, interaction_coeff, x, a_hat: int):
    """``sum_i (b2 + b3 x_i) [1(b2 + b3 x_i >= 0) - a_hat]``; broadcasts over columns."""
    c = treat_coeff + interaction_coeff * np.asarray(x, dtype=float)
    return np.sum(c * ((c >= 0).astype(float) - a_hat), axis=0)


def s_score_marginal(d: Dataset, j: int, a_opt0: int) -> float:
    """S-score of column ``j`` in closed form (summed over subjects), with
    the treatment and interaction coefficients of the single-covariate Q-model.
    """
    m = fit_q_model(d, VariableSet((j,)))
    return float(closed_form_score(m.treat_coeff, m.interaction_coeffs[0], d.covariates[:, j], a_opt0))


def s_score_definition(d: Dataset, j: int, a_opt0: int) -> float:
    """S-score of column ``j`` evaluated from per-action predictions."""
    m = fit_q_model(d, VariableSet((j,)))
    total = 0.0
    for x in d.covariates:
        best = max(predict_q(m, x, 0), predict_q(m, x, 1))
        total += best - predict_q(m, x, a_opt0)
    return total


def _marginal_contrasts(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-arm simple regressions for every column at once.

    Returns contrast coefficients (treatment, interaction) of shape (2, p)
    and a mask of columns that are constant within an arm, for which the
    two-arm decomposition does not give the minimum-norm fit.
    """
    X, y, a = d.covariates, d.outcome, d.treatment
    icpt, slope = [], []
    degenerate = np.zeros(d.p, dtype=bool)
    for arm in (0, 1):
        Xa, ya = X[a == arm], y[a == arm]
        xm = Xa.mean(axis=0)
        xc = Xa - xm
        sxx = np.sum(xc * xc, axis=0)
        sxy = xc.T @ (ya - ya.mean())
        scale = np.maximum(np.sum(Xa * Xa, axis=0), 1.0)
        bad = sxx <= 1e-12 * scale
        degenerate |= bad
        b = np.where(bad, 0.0, sxy / np.where(bad, 1.0, sxx))
        icpt.append(ya.mean() - b * xm)
        slope.append(b)
    return np.vstack([icpt[1] - icpt[0], slope[1] - slope[0]]), degenerate


def s_score_all(d: Dataset, pi: float | None = None) -> ScoreVector:
    """Marginal S-scores of every column plus their descending ranking."""
    a_opt0, _ = baseline_policy(d, pi)
    coef, degenerate = _marginal_contrasts(d)
    scores = closed_form_score(coef[0], coef[1], d.covariates, a_opt0)
    for j in np.nonzero(degenerate)[0]:
        scores[j] = s_score_marginal(d, int(j), a_opt0)
    ranking = np.argsort(-scores, kind="stable")
    return ScoreVector(scores, f"marginal, reference action {a_opt0}", ranking)


def sequential_advantage(
    d: Dataset, prev: VariableSet, j: int, prev_model: FittedQModel
) -> float:
    """Mean gain from adding column ``j`` to the model on ``prev``.

    The reference action for each subject is ``prev_model``'s argmax action;
    for an empty ``prev`` that is the covariate-free best arm.
    """
    if j in prev:
        raise ValueError(f"column {j} is already in the model")
    if prev_model.subset != prev:
        raise ValueError("prev_model was not fitted on prev")
    a_ref = (prev_model.contrast(d.covariates) > 0).astype(float)
    m = fit_q_model(d, prev.add(j))
    return float(np.mean(_gain(m.contrast(d.covariates), a_ref)))


class _Scanner:
    """Advantages of all candidate columns given the current model.

    Each candidate adds the two columns [x_j, x_j * A] to the current
    design.  They are orthogonalised against a QR basis of that design, so
    all p two-column updates are solved together; candidates whose update
    is numerically rank deficient are refitted one by one with the
    minimum-norm solver instead.
    """

    def __init__(self, d: Dataset):
        self.d = d
        self.X = d.covariates
        self.a = d.treatment.astype(float)
        self.XA = self.X * self.a[:, None]
        self.y = d.outcome
        self.col_norm = np.sqrt(np.maximum(np.sum(self.X**2, 0), np.sum(self.XA**2, 0)))

    def _generic(self, subset, a_ref, cands):
        out = np.empty(len(cands))
        for i, j in enumerate(cands):
            m = fit_q_model(self.d, subset.add(int(j)))
            out[i] = np.mean(_gain(m.contrast(self.X), a_ref))
        return out

    def advantages(self, subset: VariableSet, a_ref: np.ndarray) -> np.ndarray:
        """Advantage per column; ``-inf`` for columns already in ``subset``."""
        p = self.d.p
        adv = np.full(p, -np.inf)
        free = np.ones(p, dtype=bool)
        free[list(subset.indices)] = False
        cands = np.nonzero(free)[0]
        if cands.size == 0:
            return adv
        D = build_design(self.d, DesignSpec(subset))
        n, m = D.shape
        Q, R = np.linalg.qr(D)
        rdiag = np.abs(np.diag(R))
        if m + 2 > n or rdiag.min() <= 1e-10 * rdiag.max():
            adv[cands] = self._generic(subset, a_ref, cands)
            return adv

        k = len(subset)
        X, XA = self.X[:, cands], self.XA[:, cands]
        QtX, QtXA, Qty = Q.T @ X, Q.T @ XA, Q.T @ self.y
        Xt = X - Q @ QtX
        XAt = XA - Q @ QtXA
        e = self.y - Q @ Qty
        g11 = np.einsum("ij,ij->j", Xt, Xt)
        g12 = np.einsum("ij,ij->j", Xt, XAt)
        g22 = np.einsum("ij,ij->j", XAt, XAt)
        r1, r2 = Xt.T @ e, XAt.T @ e
        det = g11 * g22 - g12 * g12
        tr = g11 + g22
        lam_max = 0.5 * (tr + np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))
        lam_min = det / np.maximum(lam_max, np.finfo(float).tiny)
        scale = np.maximum(self.col_norm[cands], rdiag.max())
        ok = np.sqrt(np.maximum(lam_min, 0.0)) > 1e-7 * scale
        safe = np.where(ok, det, 1.0)
        c1 = (g22 * r1 - g12 * r2) / safe
        c2 = (g11 * r2 - g12 * r1) / safe

        # map previous-design coefficients to the treatment contrast
        L = np.zeros((n, m))
        L[:, 1 + k] = 1.0
        L[:, 2 + k :] = self.X[:, list(subset.indices)]
        K = np.linalg.solve(R.T, L.T).T
        h0 = K @ Qty
        C = h0[:, None] - (K @ QtX) * c1 - (K @ QtXA) * c2 + X * c2
        fast = np.mean(_gain(C, a_ref[:, None]), axis=0)
        if not np.all(ok):
            bad = ~ok
            fast[bad] = self._generic(subset, a_ref, cands[bad])
        adv[cands] = fast
        return adv


def _sequential_steps(d: Dataset, a_opt0: int) -> Iterator[tuple[int, float, FittedQModel]]:
    """Yield ``(j_k, S_k, model on M_k)`` for k = 1, 2, ... until columns run out."""
    scanner = _Scanner(d)
    subset = VariableSet()
    a_ref = np.full(d.n, float(a_opt0))
    for _ in range(d.p):
        adv = scanner.advantages(subset, a_ref)
        j = int(np.argmax(adv))
        subset = subset.add(j)
        model = fit_q_model(d, subset)
        yield j, max(float(adv[j]), 0.0), model
        a_ref = (model.contrast(d.covariates) > 0).astype(float)


def sas_select(
    d: Dataset,
    pi: float | None = None,
    cutoff: float = DEFAULT_CUTOFF,
    max_steps: int | None = None,
) -> SelectionTrace:
    """Sequential advantage selection with the proportion stopping rule.

    Step k adds the column with the largest sequential advantage S_k and
    records ``prop_k = S_k / (S_0 + ... + S_k)``.  Selection keeps the steps
    before the first one whose proportion falls below ``cutoff``.  It also
    stops after ``max_steps`` steps, when every column is in, or before a
    step whose design would have at least as many columns as rows.
    """
    d.require_both_arms()
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    if max_steps is None:
        max_steps = d.p
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    a_opt0, s0 = baseline_policy(d, pi)

    # advantages at rounding level (e.g. a constant outcome) count as zero
    noise_floor = 1e-12 * float(np.max(np.abs(d.outcome)))
    steps: list[Step] = []
    total = s0
    deficient = False
    reason, p_star = "exhausted", None
    gen = _sequential_steps(d, a_opt0)
    for k in range(1, d.p + 2):
        if k > d.p:
            break
        if k > max_steps:
            reason = "max-steps"
            break
        if 2 * (k + 1) >= d.n:
            reason = "capacity"
            break
        j, s_k, model = next(gen)
        if s_k <= noise_floor:
            s_k = 0.0
        total += s_k
        if total <= 0.0:
            steps.append(Step(j, s_k, 0.0))
            reason, p_star = "no-signal", 0
            log.info("no advantage from any covariate; selecting none")
            break
        prop = s_k / total
        steps.append(Step(j, s_k, prop))
        if prop < cutoff:
            reason, p_star = "cutoff", k - 1
            break
        deficient |= model.rank_deficient
    if p_star is None:
        p_star = len(steps)
    return SelectionTrace(
        baseline_action=a_opt0,
        baseline_advantage=s0,
        steps=tuple(steps),
        p_star=p_star,
        cutoff=cutoff,
        stop_reason=reason,
        rank_deficient=deficient,
    )


def solution_path(d: Dataset, pi: float | None = None, length: int = 30) -> list[int]:
    """Selection order of the first ``length`` steps, ignoring the stopping rule."""
    d.require_both_arms()
    if not 0 <= length <= d.p:
        raise ValueError("path length must lie in [0, p]")
    a_opt0, _ = baseline_policy(d, pi)
    steps = _sequential_steps(d, a_opt0)
    return [j for j, _, _ in itertools.islice(steps, length)]
