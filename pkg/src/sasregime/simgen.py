"""Simulation scenarios: AR(1) Gaussian covariates, baseline models I-III,
sparse contrast coefficients, randomized or confounded assignment.

Coefficient positions below use the 1-based covariate labels X1..Xp; the
arrays themselves are 0-based, so X9 lives in column 8 and its contrast
coefficient in ``beta[9]`` (``beta[0]`` is the contrast intercept).
"""

from __future__ import annotations

import re

import numpy as np

from .data import Dataset, GenerativeSpec, Observational, Randomized
from .evaluation import Regime

# 1-based covariate label -> contrast coefficient
SPARSE3 = {1: 1.0, 9: -0.9, 10: 0.8}
SPARSE8 = {**SPARSE3, 20: 0.8, 22: 1.5, 30: -2.0, 35: 2.0, 40: 3.0}
BETA0 = 0.1
GAMMA1 = {1: 1.0, 2: -1.0}
GAMMA2 = {1: 1.0, 4: -1.0, 10: 1.0}

BETAS = {"sparse3": SPARSE3, "sparse8": SPARSE8}
RHOS = {"rho02": 0.2, "rho05": 0.5, "rho08": 0.8}
N_DEFAULT, P_DEFAULT, NOISE_SD = 200, 1000, 0.5

_KEY = re.compile(r"^(I|II|III)-(sparse3|sparse8)-rho(\d\d)-(rct|obs)$")


def _vector(entries: dict[int, float], p: int, offset: int = 0) -> np.ndarray:
    v = np.zeros(p + offset)
    for label, val in entries.items():
        if label > p:
            raise ValueError(f"X{label} does not exist when p = {p}")
        v[label - 1 + offset] = val
    return v


def make_spec(
    model: str = "I",
    beta: str | dict = "sparse3",
    rho: float = 0.2,
    assignment="rct",
    n: int = N_DEFAULT,
    p: int = P_DEFAULT,
    noise_sd: float = NOISE_SD,
    beta0: float = BETA0,
) -> GenerativeSpec:
    coeffs = BETAS[beta] if isinstance(beta, str) else beta
    b = _vector(coeffs, p, offset=1)
    b[0] = beta0
    if assignment == "rct":
        assignment = Randomized(0.5)
    elif assignment == "obs":
        assignment = Observational()
    return GenerativeSpec(
        model=model,
        beta=b,
        gamma1=_vector(GAMMA1, p),
        gamma2=_vector(GAMMA2, p),
        rho=rho,
        noise_sd=noise_sd,
        assignment=assignment,
        n=n,
        p=p,
    )


def scenario(key: str, n: int = N_DEFAULT, p: int = P_DEFAULT) -> GenerativeSpec:
    """Preset by key such as ``"I-sparse3-rho02-rct"`` or ``"III-sparse8-rho08-obs"``."""
    m = _KEY.match(key)
    if not m:
        raise KeyError(
            f"unknown scenario {key!r}; expected MODEL-BETA-rhoNN-ASSIGN, "
            "e.g. I-sparse3-rho02-rct"
        )
    model, beta, rho, assign = m.groups()
    if f"rho{rho}" not in RHOS:
        raise KeyError(f"unknown correlation rho{rho}; use one of {sorted(RHOS)}")
    return make_spec(model, beta, RHOS[f"rho{rho}"], assign, n=n, p=p)


def scenario_keys() -> list[str]:
    return [
        f"{m}-{b}-{r}-{a}"
        for a in ("rct", "obs")
        for b in BETAS
        for m in ("I", "II", "III")
        for r in RHOS
    ]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Counter-based derivation: the same (seed, key) always gives the same stream."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + key)
    return np.random.SeedSequence(seed, spawn_key=key)


def gen_covariates(n: int, p: int, rho: float, seed) -> np.ndarray:
    """Rows with unit-variance Gaussian entries and Corr(X_j, X_k) = rho^|j-k|.

    Built by the stationary AR(1) recursion across columns, so no p x p
    covariance is formed.  Innovations are drawn column by column, which
    makes the first q columns independent of p.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    rng = _rng(seed)
    Z = rng.standard_normal((p, n))
    X = np.empty((n, p))
    X[:, 0] = Z[0]
    s = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + s * Z[j]
    return X


def logistic(u):
    return 1.0 / (1.0 + np.exp(-u))


def propensity(X: np.ndarray, assignment) -> np.ndarray:
    """P(A = 1 | X) under the assignment mechanism."""
    X = np.atleast_2d(X)
    if isinstance(assignment, Randomized):
        return np.full(X.shape[0], assignment.prob)
    if isinstance(assignment, Observational):
        if X.shape[1] < 29:
            raise ValueError("observational assignment needs p >= 29")
        return logistic(-0.2 + 0.8 * X[:, 0] ** 2 + 0.8 * X[:, 28] ** 2)
    raise TypeError(f"unknown assignment {assignment!r}")


def gen_treatment(X: np.ndarray, assignment, seed) -> np.ndarray:
    prob = propensity(X, assignment)
    return (_rng(seed).random(prob.shape[0]) < prob).astype(np.int64)


def baseline_mean(X: np.ndarray, spec: GenerativeSpec) -> np.ndarray:
    X = np.atleast_2d(X)
    u = X @ np.asarray(spec.gamma1)
    if spec.model == "I":
        return 1.0 + u
    v = X @ np.asarray(spec.gamma2)
    if spec.model == "II":
        return 1.0 + 0.5 * u * v
    return 1.0 + 0.5 * np.sin(np.pi * u) + 0.25 * (1.0 + v) ** 2


def contrast_mean(X: np.ndarray, spec: GenerativeSpec) -> np.ndarray:
    b = spec.beta_array
    return b[0] + np.atleast_2d(X) @ b[1:]


def gen_outcome(X: np.ndarray, A: np.ndarray, spec: GenerativeSpec, seed, noise: bool = True):
    X = np.atleast_2d(X)
    if X.shape[1] != spec.p or np.shape(A) != (X.shape[0],):
        raise ValueError("dimensions of X and A do not match the spec")
    y = baseline_mean(X, spec) + np.asarray(A) * contrast_mean(X, spec)
    if noise:
        y = y + spec.noise_sd * _rng(seed).standard_normal(X.shape[0])
    return y


def generate(spec: GenerativeSpec, seed) -> Dataset:
    """One simulated dataset; independent streams for X, A and the noise."""
    sx, sa, se = (child_seed(seed, i) for i in range(3))
    X = gen_covariates(spec.n, spec.p, spec.rho, sx)
    A = gen_treatment(X, spec.assignment, sa)
    Y = gen_outcome(X, A, spec, se)
    return Dataset(X, A, Y)


def true_regime(spec: GenerativeSpec) -> Regime:
    """Treat exactly when beta0 + beta'x >= 0."""
    b = spec.beta_array
    return Regime.linear(b[0], b[1:], treat_on_tie=True, provenance="true")
