"""Treatment regimes and the metrics used to judge them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import UNDEFINED, Dataset, FittedQModel, GenerativeSpec


@dataclass(frozen=True)
class Regime:
    """Linear threshold rule: treat when ``intercept + sum coefs * x[indices]``
    is positive, or zero if ``treat_on_tie``.

    Every regime in this package (fitted Q-models, LASSO contrasts, the true
    rule, constant rules) has this form, which keeps regimes picklable and
    serialisable.
    """

    intercept: float
    indices: tuple[int, ...] = ()
    coefs: tuple[float, ...] = ()
    treat_on_tie: bool = False
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "coefs", tuple(float(c) for c in self.coefs))
        object.__setattr__(self, "intercept", float(self.intercept))
        if len(self.indices) != len(self.coefs):
            raise ValueError("indices and coefs must have equal length")

    @classmethod
    def linear(cls, intercept, coefs, treat_on_tie=False, provenance=""):
        """Rule from a dense coefficient vector; zero coefficients are dropped."""
        coefs = np.asarray(coefs, dtype=float)
        nz = np.nonzero(coefs)[0]
        return cls(intercept, tuple(nz), tuple(coefs[nz]), treat_on_tie, provenance)

    @classmethod
    def constant(cls, action: int, provenance=None):
        if action not in (0, 1):
            raise ValueError("action must be 0 or 1")
        return cls(1.0 if action else -1.0, provenance=provenance or f"constant-{action}")

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.indices:
            return np.full(X.shape[0], self.intercept)
        return self.intercept + X[:, list(self.indices)] @ np.asarray(self.coefs)

    def actions(self, X) -> np.ndarray:
        s = self.score(X)
        return ((s >= 0) if self.treat_on_tie else (s > 0)).astype(np.int64)

    def __call__(self, x) -> int:
        return int(self.actions(np.asarray(x, dtype=float)[None, :])[0])

    def complement(self) -> "Regime":
        """The rule that always picks the other action."""
        return Regime(
            -self.intercept,
            self.indices,
            tuple(-c for c in self.coefs),
            not self.treat_on_tie,
            f"not {self.provenance}",
        )


def regime_from_q(m: FittedQModel, provenance: str = "Q-model") -> Regime:
    """Argmax action of a fitted Q-model; equal predicted means give action 0."""
    return Regime(m.treat_coeff, m.subset.indices, tuple(m.interaction_coeffs), False, provenance)


def value_on_sample(regime: Regime, spec: GenerativeSpec, X: np.ndarray) -> float:
    """Mean noiseless outcome when the rows of ``X`` are treated by ``regime``."""
    from .simgen import baseline_mean, contrast_mean

    a = regime.actions(X)
    return float(np.mean(baseline_mean(X, spec) + a * contrast_mean(X, spec)))


def mc_value(regime: Regime, spec: GenerativeSpec, reps: int = 10_000, seed=0) -> float:
    """Monte-Carlo value of a regime under a known generative model.

    The additive noise has mean zero and is left out, which lowers the
    Monte-Carlo variance without changing the expectation.
    """
    from .simgen import gen_covariates

    if reps < 1:
        raise ValueError("reps must be at least 1")
    X = gen_covariates(reps, spec.p, spec.rho, seed)
    return value_on_sample(regime, spec, X)


def error_rate(regime: Regime, true_beta, sample) -> float:
    """Share of rows where the regime disagrees with 1(beta0 + beta'x >= 0)."""
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    if sample.shape[0] == 0:
        raise ValueError("empty sample")
    b = np.asarray(true_beta, dtype=float)
    truth = (b[0] + sample @ b[1:] >= 0).astype(np.int64)
    return float(np.mean(regime.actions(sample) != truth))


def tdr_tp(selected, truth) -> tuple[float, int]:
    """True discovery rate and true-positive count; TDR is NaN for an empty selection."""
    sel = set(selected)
    tp = len(sel & set(truth))
    tdr = tp / len(sel) if sel else UNDEFINED
    return tdr, tp


def _ipw_terms(d: Dataset, regime: Regime, propensity) -> np.ndarray:
    prop = np.broadcast_to(np.asarray(propensity, dtype=float), (d.n,))
    if np.any((prop <= 0) | (prop >= 1)) or not np.all(np.isfinite(prop)):
        raise ValueError("propensities must lie strictly inside (0, 1)")
    a = d.treatment
    p_obs = np.where(a == 1, prop, 1.0 - prop)
    follow = regime.actions(d.covariates) == a
    return d.outcome * follow / p_obs


def ipw_value(d: Dataset, regime: Regime, propensity) -> float:
    """(1/n) sum Y_i 1(A_i = g(X_i)) / P(A_i | X_i); ``propensity`` is P(A=1|X)."""
    return float(np.mean(_ipw_terms(d, regime, propensity)))


def bootstrap_value_diff(
    d: Dataset, regime_a: Regime, regime_b: Regime, propensity, B: int = 1000, seed=0
) -> tuple[float, float, float]:
    """IPW value difference A - B with a percentile 95% bootstrap interval.

    Subjects are resampled with replacement; the regimes are held fixed.
    """
    if B < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    u = _ipw_terms(d, regime_a, propensity) - _ipw_terms(d, regime_b, propensity)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, d.n, size=(B, d.n))
    boot = u[idx].mean(axis=1)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return float(u.mean()), float(lo), float(hi)


def mean_skipping_undefined(values) -> float:
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else math.nan
