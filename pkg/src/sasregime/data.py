"""Core value types shared across the package.

All containers are immutable after construction: numpy arrays are copied
and flagged read-only, sequences are stored as tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

#: Marker for a true discovery rate that is undefined (empty selection).
UNDEFINED = math.nan


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates ``X`` (n x p), binary treatment ``A`` and outcome ``Y``.

    Shapes are checked on construction; value-level problems (non-binary
    treatment, NaNs, a single arm) are reported by :func:`validate_dataset`
    and enforced by the operations that need them.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError("covariates must be a 2-d matrix")
        object.__setattr__(self, "covariates", _frozen(X))
        object.__setattr__(self, "treatment", _frozen(np.ravel(self.treatment)))
        object.__setattr__(self, "outcome", _frozen(np.ravel(self.outcome)))
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != X.shape[1]:
                raise ValueError(
                    f"{len(names)} column names for {X.shape[1]} covariates"
                )
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def name_of(self, j: int) -> str:
        """External label for column ``j``: its name, else the 1-based index."""
        if self.column_names is not None:
            return self.column_names[j]
        return f"X{j + 1}"

    def arm_counts(self) -> tuple[int, int]:
        a = self.treatment
        return int(np.sum(a == 0)), int(np.sum(a == 1))

    def require_both_arms(self) -> None:
        if self.n == 0:
            raise ValueError("empty dataset")
        n0, n1 = self.arm_counts()
        if n0 == 0 or n1 == 0:
            raise ValueError("both treatment arms must contain at least one subject")

    def subset_rows(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            self.covariates[rows], self.treatment[rows], self.outcome[rows],
            self.column_names,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.column_names == other.column_names
            and np.array_equal(self.covariates, other.covariates)
            and np.array_equal(self.treatment, other.treatment)
            and np.array_equal(self.outcome, other.outcome)
        )

    __hash__ = None


def validate_dataset(d: Dataset) -> list[str]:
    """Return a list of human-readable findings; an empty list means valid."""
    findings = []
    n, p = d.covariates.shape
    if n < 1:
        findings.append("no subjects")
    if p < 1:
        findings.append("no covariates")
    if d.treatment.shape[0] != n:
        findings.append(f"treatment length {d.treatment.shape[0]} != {n} rows")
    if d.outcome.shape[0] != n:
        findings.append(f"outcome length {d.outcome.shape[0]} != {n} rows")
    if not np.all(np.isfinite(d.covariates)):
        bad = sorted({int(j) for j in np.nonzero(~np.isfinite(d.covariates))[1]})
        findings.append(
            "non-finite covariates in columns "
            + ", ".join(d.name_of(j) for j in bad[:10])
        )
    if not np.all(np.isfinite(d.outcome)):
        findings.append("non-finite outcome")
    a = d.treatment
    if not np.all(np.isin(a, (0, 1))):
        findings.append("non-binary treatment")
    elif a.shape[0] == n and n > 0:
        n0, n1 = d.arm_counts()
        if n0 == 0 or n1 == 0:
            findings.append("single-arm data: only treatment %d observed" % (1 if n1 else 0))
    return findings


@dataclass(frozen=True)
class VariableSet:
    """Ordered, duplicate-free list of 0-based column indices."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in {idx}")
        if any(i < 0 for i in idx):
            raise ValueError(f"negative index in {idx}")
        object.__setattr__(self, "indices", idx)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, j) -> bool:
        return j in self.indices

    def __getitem__(self, k):
        return self.indices[k]

    def add(self, j: int) -> "VariableSet":
        return VariableSet(self.indices + (int(j),))

    def check(self, p: int) -> None:
        for j in self.indices:
            if j >= p:
                raise IndexError(f"column index {j} out of range for p={p}")


@dataclass(frozen=True, eq=False)
class FittedQModel:
    """Least-squares fit of Y on [1, X_M, A, X_M * A]."""

    subset: VariableSet
    intercept: float
    main_coeffs: np.ndarray
    treat_coeff: float
    interaction_coeffs: np.ndarray
    rank_deficient: bool = False

    def __post_init__(self):
        object.__setattr__(self, "main_coeffs", _frozen(self.main_coeffs))
        object.__setattr__(self, "interaction_coeffs", _frozen(self.interaction_coeffs))
        k = len(self.subset)
        if self.main_coeffs.shape != (k,) or self.interaction_coeffs.shape != (k,):
            raise ValueError("coefficient vectors must match the subset size")

    def contrast(self, X) -> np.ndarray:
        """Predicted treatment effect E(Y|x,1) - E(Y|x,0) for each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = list(self.subset.indices)
        return self.treat_coeff + X[:, idx] @ self.interaction_coeffs

    def __eq__(self, other):
        if not isinstance(other, FittedQModel):
            return NotImplemented
        return (
            self.subset == other.subset
            and self.intercept == other.intercept
            and self.treat_coeff == other.treat_coeff
            and self.rank_deficient == other.rank_deficient
            and np.array_equal(self.main_coeffs, other.main_coeffs)
            and np.array_equal(self.interaction_coeffs, other.interaction_coeffs)
        )

    __hash__ = None


@dataclass(frozen=True)
class Step:
    index: int
    advantage: float
    prop: float


@dataclass(frozen=True)
class SelectionTrace:
    """Record of one sequential advantage selection run.

    ``steps`` may extend past ``p_star``: the step whose proportion fell
    below the cutoff is kept for diagnostics.  ``stop_reason`` is one of
    ``"cutoff"``, ``"no-signal"``, ``"capacity"``, ``"max-steps"`` or
    ``"exhausted"``.
    """

    baseline_action: int
    baseline_advantage: float
    steps: tuple[Step, ...]
    p_star: int
    cutoff: float
    stop_reason: str = "cutoff"
    rank_deficient: bool = False

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not 0 <= self.p_star <= len(self.steps):
            raise ValueError("p_star must lie in [0, number of steps]")

    @property
    def selected(self) -> VariableSet:
        return VariableSet(tuple(s.index for s in self.steps[: self.p_star]))

    @property
    def advantages(self) -> np.ndarray:
        return np.array([s.advantage for s in self.steps])

    @property
    def props(self) -> np.ndarray:
        return np.array([s.prop for s in self.steps])


@dataclass(frozen=True)
class Randomized:
    prob: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.prob < 1.0:
            raise ValueError("randomization probability must lie in (0, 1)")


@dataclass(frozen=True)
class Observational:
    """Confounded assignment: logit P(A=1) = -0.2 + 0.8 X1^2 + 0.8 X29^2."""


@dataclass(frozen=True)
class GenerativeSpec:
    """Simulation scenario.

    ``beta`` holds the treatment-contrast intercept followed by one
    coefficient per covariate (length p+1).  ``gamma1``/``gamma2`` are the
    baseline-function directions (length p).  Vectors are stored as tuples so
    specs hash and compare by value.
    """

    model: str
    beta: tuple[float, ...]
    gamma1: tuple[float, ...]
    gamma2: tuple[float, ...]
    rho: float
    noise_sd: float
    assignment: Randomized | Observational
    n: int
    p: int

    def __post_init__(self):
        for name in ("beta", "gamma1", "gamma2"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.model not in ("I", "II", "III"):
            raise ValueError(f"unknown baseline model {self.model!r}")
        if len(self.beta) != self.p + 1:
            raise ValueError("beta must have length p + 1")
        if len(self.gamma1) != self.p or len(self.gamma2) != self.p:
            raise ValueError("gamma vectors must have length p")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if isinstance(self.assignment, Observational) and self.p < 29:
            raise ValueError("observational assignment needs p >= 29")

    @property
    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta)

    @property
    def important(self) -> VariableSet:
        """Covariates with a nonzero contrast coefficient (0-based)."""
        return VariableSet(tuple(j for j, b in enumerate(self.beta[1:]) if b != 0))


@dataclass(frozen=True)
class RegimeReport:
    size: int
    tdr: float
    tp: int
    value: float = math.nan
    error_rate: float = math.nan

    def __post_init__(self):
        if self.tp > self.size:
            raise ValueError("tp cannot exceed size")
