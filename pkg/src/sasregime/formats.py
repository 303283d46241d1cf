"""File formats: CSV datasets, tab-separated tables, JSON records, YAML configs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import (
    Dataset,
    FittedQModel,
    GenerativeSpec,
    Observational,
    Randomized,
    RegimeReport,
    SelectionTrace,
    Step,
    VariableSet,
)
from .evaluation import Regime


class FormatError(ValueError):
    """Unreadable input file; the message carries the file and line number."""


# --- numbers ----------------------------------------------------------------


def fmt_float(x) -> str:
    """Shortest text that parses back to the same float; NaN is written ``NA``."""
    x = float(x)
    if math.isnan(x):
        return "NA"
    return repr(x)


def parse_float(s: str) -> float:
    s = s.strip()
    if s in ("NA", "nan", "NaN", ""):
        return math.nan
    return float(s)


# --- datasets ---------------------------------------------------------------


def write_dataset_csv(d: Dataset, path, outcome: str = "Y", treatment: str = "A") -> None:
    names = [d.name_of(j) for j in range(d.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([outcome, treatment] + names)
        for y, a, x in zip(d.outcome, d.treatment, d.covariates):
            w.writerow([fmt_float(y), str(int(a))] + [fmt_float(v) for v in x])


def read_dataset_csv(
    path,
    outcome: str,
    treatment: str,
    covariates: Sequence[str] | None = None,
    treatment_labels: Sequence[str] | None = None,
) -> Dataset:
    """Read a headed CSV into a :class:`Dataset`.

    ``covariates=None`` takes every column other than outcome and treatment.
    Treatment cells must be 0/1 unless ``treatment_labels`` gives the two
    labels mapped to 0 and 1, in that order.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise FormatError(f"{path}:1: duplicate column names")
        pos = {h: i for i, h in enumerate(header)}
        for col in (outcome, treatment):
            if col not in pos:
                raise FormatError(f"{path}:1: no column named {col!r}")
        if covariates is None:
            covariates = [h for h in header if h not in (outcome, treatment)]
        missing = [c for c in covariates if c not in pos]
        if missing:
            raise FormatError(f"{path}:1: no columns named {missing}")
        if not covariates:
            raise FormatError(f"{path}:1: no covariate columns")
        if treatment_labels is not None:
            if len(treatment_labels) != 2 or treatment_labels[0] == treatment_labels[1]:
                raise FormatError("treatment_labels must name two distinct labels")
            tmap = {str(treatment_labels[0]): 0, str(treatment_labels[1]): 1}
        else:
            tmap = {"0": 0, "1": 1, "0.0": 0, "1.0": 1}
        cidx = [pos[c] for c in covariates]
        X, A, Y = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
                )
            t = row[pos[treatment]].strip()
            if t not in tmap:
                raise FormatError(
                    f"{path}:{lineno}: treatment value {t!r} not in {sorted(tmap)}"
                )
            try:
                y = float(row[pos[outcome]])
                x = [float(row[i]) for i in cidx]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            A.append(tmap[t])
            Y.append(y)
            X.append(x)
    if not X:
        raise FormatError(f"{path}: no data rows")
    return Dataset(np.array(X), np.array(A, dtype=np.int64), np.array(Y), tuple(covariates))


# --- tables -----------------------------------------------------------------


def write_table(path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            cells = []
            for c in columns:
                v = row.get(c, "")
                if isinstance(v, (float, np.floating)):
                    cells.append(fmt_float(v))
                else:
                    cells.append(str(v))
            fh.write("\t".join(cells) + "\n")


def read_table(path) -> list[dict]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        return []
    cols = lines[0].split("\t")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(cols):
            raise FormatError(f"{path}:{lineno}: expected {len(cols)} fields")
        out.append(dict(zip(cols, cells)))
    return out


REPORT_COLUMNS = ("size", "tdr", "tp", "value", "error_rate")


def report_to_row(r: RegimeReport) -> dict:
    return {
        "size": r.size,
        "tdr": r.tdr,
        "tp": r.tp,
        "value": r.value,
        "error_rate": r.error_rate,
    }


def report_from_row(row: dict) -> RegimeReport:
    return RegimeReport(
        size=int(row["size"]),
        tdr=parse_float(row["tdr"]),
        tp=int(row["tp"]),
        value=parse_float(row["value"]),
        error_rate=parse_float(row["error_rate"]),
    )


def reports_equal(a: RegimeReport, b: RegimeReport) -> bool:
    """Field-wise equality with NaN equal to NaN."""
    for f in REPORT_COLUMNS:
        x, y = getattr(a, f), getattr(b, f)
        if not (x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))):
            return False
    return True


# --- JSON records -----------------------------------------------------------


def _json_float(x: float):
    x = float(x)
    return None if math.isnan(x) else x


def _from_json_float(x) -> float:
    return math.nan if x is None else float(x)


def trace_to_dict(t: SelectionTrace) -> dict:
    return {
        "baseline_action": t.baseline_action,
        "baseline_advantage": t.baseline_advantage,
        "steps": [
            {"index": s.index, "advantage": s.advantage, "prop": _json_float(s.prop)}
            for s in t.steps
        ],
        "p_star": t.p_star,
        "cutoff": t.cutoff,
        "stop_reason": t.stop_reason,
        "rank_deficient": t.rank_deficient,
    }


def trace_from_dict(obj: dict) -> SelectionTrace:
    return SelectionTrace(
        baseline_action=int(obj["baseline_action"]),
        baseline_advantage=float(obj["baseline_advantage"]),
        steps=tuple(
            Step(int(s["index"]), float(s["advantage"]), _from_json_float(s["prop"]))
            for s in obj["steps"]
        ),
        p_star=int(obj["p_star"]),
        cutoff=float(obj["cutoff"]),
        stop_reason=obj.get("stop_reason", "cutoff"),
        rank_deficient=bool(obj.get("rank_deficient", False)),
    )


def _sparse(vec) -> dict[str, float]:
    return {str(i): float(v) for i, v in enumerate(vec) if v != 0}


def _dense(obj: dict, length: int) -> np.ndarray:
    v = np.zeros(length)
    for k, val in obj.items():
        v[int(k)] = float(val)
    return v


def spec_to_dict(s: GenerativeSpec) -> dict:
    """Vectors are stored sparsely, keyed by 0-based array position."""
    if isinstance(s.assignment, Randomized):
        assign = {"randomized": s.assignment.prob}
    else:
        assign = "observational"
    return {
        "model": s.model,
        "n": s.n,
        "p": s.p,
        "rho": s.rho,
        "noise_sd": s.noise_sd,
        "assignment": assign,
        "beta": _sparse(s.beta),
        "gamma1": _sparse(s.gamma1),
        "gamma2": _sparse(s.gamma2),
    }


def spec_from_dict(obj: dict) -> GenerativeSpec:
    p = int(obj["p"])
    a = obj["assignment"]
    if a == "observational":
        assignment = Observational()
    else:
        assignment = Randomized(float(a["randomized"]))
    return GenerativeSpec(
        model=obj["model"],
        beta=_dense(obj["beta"], p + 1),
        gamma1=_dense(obj["gamma1"], p),
        gamma2=_dense(obj["gamma2"], p),
        rho=float(obj["rho"]),
        noise_sd=float(obj["noise_sd"]),
        assignment=assignment,
        n=int(obj["n"]),
        p=p,
    )


def regime_to_dict(r: Regime) -> dict:
    return {
        "intercept": r.intercept,
        "indices": list(r.indices),
        "coefs": list(r.coefs),
        "treat_on_tie": r.treat_on_tie,
        "provenance": r.provenance,
    }


def regime_from_dict(obj: dict) -> Regime:
    return Regime(
        obj["intercept"], tuple(obj["indices"]), tuple(obj["coefs"]),
        bool(obj["treat_on_tie"]), obj.get("provenance", ""),
    )


def qmodel_to_dict(m: FittedQModel) -> dict:
    return {
        "subset": list(m.subset.indices),
        "intercept": m.intercept,
        "main_coeffs": [float(c) for c in m.main_coeffs],
        "treat_coeff": m.treat_coeff,
        "interaction_coeffs": [float(c) for c in m.interaction_coeffs],
        "rank_deficient": m.rank_deficient,
    }


def qmodel_from_dict(obj: dict) -> FittedQModel:
    return FittedQModel(
        subset=VariableSet(tuple(obj["subset"])),
        intercept=float(obj["intercept"]),
        main_coeffs=np.array(obj["main_coeffs"], dtype=float),
        treat_coeff=float(obj["treat_coeff"]),
        interaction_coeffs=np.array(obj["interaction_coeffs"], dtype=float),
        rank_deficient=bool(obj["rank_deficient"]),
    )


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
