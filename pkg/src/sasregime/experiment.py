"""Replicated simulation runs, solution-path tables and the real-data report.

Seeds are derived from the master seed by counter: the dataset of
replicate r uses stream (0, r), the LASSO fold split (1, r), the shared
Monte-Carlo value sample (2,) and the shared error-rate sample (3,).  Adding
methods or workers therefore never changes the simulated data.
"""

from __future__ import annotations

import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .comparators import (
    lasso_alearning_fit,
    lasso_regime,
    lasso_solution_path,
    sscore_nonzero_set,
    sscore_topk_regime,
)
from .config import ExperimentConfig, RealDataConfig
from .data import Dataset, GenerativeSpec, Randomized, RegimeReport, validate_dataset
from .evaluation import (
    Regime,
    bootstrap_value_diff,
    error_rate,
    ipw_value,
    regime_from_q,
    tdr_tp,
    value_on_sample,
)
from .formats import (
    FormatError,
    dump_json,
    read_dataset_csv,
    trace_to_dict,
    write_table,
)
from .regression import arm_regressions, fit_q_model
from .selection import s_score_all, sas_select, solution_path, treatment_fraction
from .simgen import child_seed, gen_covariates, generate, true_regime

log = logging.getLogger(__name__)

STREAM_DATA, STREAM_FOLDS, STREAM_MC, STREAM_ERR = 0, 1, 2, 3

_SAMPLES: dict = {}


def population_sample(spec: GenerativeSpec, seed: int, stream: int, reps: int) -> np.ndarray:
    """Covariate sample shared by all replicates of a run (cached per process)."""
    key = (spec.p, spec.rho, seed, stream, reps)
    if key not in _SAMPLES:
        if len(_SAMPLES) > 4:
            _SAMPLES.clear()
        _SAMPLES[key] = gen_covariates(reps, spec.p, spec.rho, child_seed(seed, stream))
    return _SAMPLES[key]


def known_pi(spec: GenerativeSpec) -> float | None:
    """Randomisation probability when it is known by design, else None."""
    return spec.assignment.prob if isinstance(spec.assignment, Randomized) else None


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    reports: dict  # method -> RegimeReport
    paths: dict  # method -> list of cumulative true-positive counts
    error: str | None = None


def _report(selected, truth, regime, spec, X_mc, X_err) -> RegimeReport:
    tdr, tp = tdr_tp(selected, truth)
    value = err = math.nan
    if regime is not None:
        value = value_on_sample(regime, spec, X_mc)
        err = error_rate(regime, spec.beta_array, X_err)
    return RegimeReport(len(selected), tdr, tp, value, err)


def _cumulative_hits(order, truth, length) -> list[int]:
    truth = set(truth)
    hits = [0]
    for k in range(length):
        inc = 1 if k < len(order) and order[k] in truth else 0
        hits.append(hits[-1] + inc)
    return hits


def run_replicate(cfg: ExperimentConfig, rep: int, want_reports=True, want_paths=False):
    spec = cfg.generative_spec()
    truth = spec.important
    try:
        d = generate(spec, child_seed(cfg.seed, STREAM_DATA, rep))
        pi = known_pi(spec)
        reports, paths = {}, {}
        X_mc = X_err = None
        if want_reports:
            X_mc = population_sample(spec, cfg.seed, STREAM_MC, cfg.mc_reps)
            X_err = population_sample(spec, cfg.seed, STREAM_ERR, cfg.mc_reps)
        trace = None
        if "sas" in cfg.methods or "sscore-topk" in cfg.methods:
            trace = sas_select(d, pi, cfg.cutoff)
        if "sas" in cfg.methods:
            if want_reports:
                model = fit_q_model(d, trace.selected)
                reports["sas"] = _report(
                    trace.selected, truth, regime_from_q(model, "sas"), spec, X_mc, X_err
                )
            if want_paths:
                order = solution_path(d, pi, min(cfg.path_length, d.p))
                paths["sas"] = _cumulative_hits(order, truth, cfg.path_length)
        scores = None
        if "sscore-all" in cfg.methods or "sscore-topk" in cfg.methods:
            scores = s_score_all(d, pi)
        if "sscore-all" in cfg.methods:
            if want_reports:
                reports["sscore-all"] = _report(
                    sscore_nonzero_set(scores), truth, None, spec, X_mc, X_err
                )
            if want_paths:
                paths["sscore-all"] = _cumulative_hits(
                    [int(j) for j in scores.ranking], truth, cfg.path_length
                )
        if "sscore-topk" in cfg.methods and want_reports:
            chosen, model = sscore_topk_regime(d, scores, trace.p_star)
            reports["sscore-topk"] = _report(
                chosen, truth, regime_from_q(model, "sscore-topk"), spec, X_mc, X_err
            )
        if "lasso" in cfg.methods:
            fit = lasso_alearning_fit(
                d, folds=cfg.folds, seed=child_seed(cfg.seed, STREAM_FOLDS, rep)
            )
            if want_reports:
                reports["lasso"] = _report(
                    fit.selected, truth, lasso_regime(fit), spec, X_mc, X_err
                )
            if want_paths:
                paths["lasso"] = _cumulative_hits(
                    lasso_solution_path(fit), truth, cfg.path_length
                )
        return ReplicateResult(rep, reports, paths)
    except Exception as exc:  # recorded, excluded from summaries
        log.warning("replicate %d failed: %s", rep, exc)
        return ReplicateResult(rep, {}, {}, f"{type(exc).__name__}: {exc}")


def _map_replicates(cfg: ExperimentConfig, func) -> list[ReplicateResult]:
    reps = range(cfg.replications)
    if cfg.jobs <= 1:
        return [func(cfg, r) for r in reps]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
        return list(ex.map(partial(func, cfg), reps, chunksize=max(1, cfg.replications // (4 * cfg.jobs))))


def _mean_sd(values, skip_nan=True):
    v = np.asarray(values, dtype=float)
    if skip_nan:
        v = v[~np.isnan(v)]
    if v.size == 0:
        return math.nan, math.nan, 0
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), sd, int(v.size)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicates: list
    true_value: float
    summary: dict  # method -> metric -> (mean, sd, count)

    @property
    def failures(self) -> list:
        return [r for r in self.replicates if r.error is not None]

    def mean(self, method: str, metric: str) -> float:
        return self.summary[method][metric][0]


def summarize(cfg: ExperimentConfig, results) -> dict:
    ok = [r for r in results if r.error is None]
    out = {}
    for method in cfg.methods:
        reps = [r.reports[method] for r in ok if method in r.reports]
        if not reps:
            continue
        tdrs = [r.tdr for r in reps]
        if cfg.tdr_empty == "zero":
            tdrs = [0.0 if math.isnan(t) else t for t in tdrs]
        out[method] = {
            "size": _mean_sd([r.size for r in reps]),
            "tdr": _mean_sd(tdrs),
            "tp": _mean_sd([r.tp for r in reps]),
            "value": _mean_sd([r.value for r in reps]),
            "error_rate": _mean_sd([r.error_rate for r in reps]),
        }
    return out


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Replicate every method on fresh simulated data and summarise.

    With ``write`` the per-replicate table, the summary, a publication-style text
    table and a run manifest are written to ``cfg.out``.
    """
    spec = cfg.generative_spec()
    results = _map_replicates(cfg, run_replicate)
    X_mc = population_sample(spec, cfg.seed, STREAM_MC, cfg.mc_reps)
    true_value = value_on_sample(true_regime(spec), spec, X_mc)
    res = ExperimentResult(cfg, results, true_value, summarize(cfg, results))
    if write:
        write_experiment(res)
    return res


def _manifest(cfg, extra) -> dict:
    return {
        "package": "sasregime",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.canonical(),
        "config_sha256": cfg.digest(),
        **extra,
    }


SUMMARY_COLUMNS = ("method", "metric", "mean", "sd", "count")


def write_experiment(res: ExperimentResult) -> Path:
    cfg = res.config
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in res.replicates:
        if r.error is not None:
            rows.append({"replicate": r.replicate, "method": "*", "status": r.error.replace("\t", " ")})
            continue
        for method in cfg.methods:
            rep = r.reports[method]
            rows.append(
                {"replicate": r.replicate, "method": method, "status": "ok",
                 "size": rep.size, "tdr": rep.tdr, "tp": rep.tp,
                 "value": rep.value, "error_rate": rep.error_rate}
            )
    write_table(out / "replicates.tsv", rows,
                ("replicate", "method", "status", "size", "tdr", "tp", "value", "error_rate"))
    srows = [{"method": "true", "metric": "value", "mean": res.true_value, "sd": 0.0, "count": 1}]
    for method, metrics in res.summary.items():
        for metric, (m, sd, c) in metrics.items():
            srows.append({"method": method, "metric": metric, "mean": m, "sd": sd, "count": c})
    write_table(out / "summary.tsv", srows, SUMMARY_COLUMNS)
    (out / "table.txt").write_text(format_table(res))
    dump_json(
        _manifest(cfg, {
            "verb": "simulate",
            "scenario_spec_key": cfg.scenario,
            "true_value": res.true_value,
            "failed_replicates": [r.replicate for r in res.failures],
            "sd_note": "parenthesised values are standard deviations across replicates",
        }),
        out / "manifest.json",
    )
    return out


def format_table(res: ExperimentResult) -> str:
    """Publication-style text table: mean with the across-replicate sd in parentheses."""

    def cell(stat, digits=2):
        m, sd, c = stat
        if c == 0 or math.isnan(m):
            return "-"
        return f"{m:.{digits}f} ({sd:.{digits}f})"

    label = res.config.scenario or "custom spec"
    lines = [
        f"scenario: {label}",
        f"replications: {res.config.replications} ({len(res.failures)} failed)",
        f"true value Q(g_opt): {res.true_value:.3f}",
        "",
        f"{'method':<12} {'Size':>16} {'TDR':>14} {'TP':>14} {'Value':>14} {'Err.rate':>14}",
    ]
    for method, s in res.summary.items():
        lines.append(
            f"{method:<12} {cell(s['size']):>16} {cell(s['tdr']):>14} {cell(s['tp']):>14} "
            f"{cell(s['value']):>14} {cell(s['error_rate'], 3):>14}"
        )
    lines.append("")
    lines.append("parenthesised values: standard deviation across replicates")
    return "\n".join(lines) + "\n"


@dataclass
class PathResult:
    config: ExperimentConfig
    replicates: list
    mean_counts: dict  # method -> list over positions 0..L

    @property
    def failures(self):
        return [r for r in self.replicates if r.error is not None]


def _path_replicate(cfg, rep):
    return run_replicate(cfg, rep, want_reports=False, want_paths=True)


def run_paths(cfg: ExperimentConfig, write: bool = True) -> PathResult:
    """Replicate-averaged count of true important variables among the first k selected."""
    cfg = cfg.override(methods=[m for m in cfg.methods if m != "sscore-topk"] or ["sas"])
    results = _map_replicates(cfg, _path_replicate)
    ok = [r for r in results if r.error is None]
    means = {}
    for method in cfg.methods:
        counts = np.array([r.paths[method] for r in ok], dtype=float)
        means[method] = counts.mean(axis=0).tolist() if counts.size else []
    res = PathResult(cfg, results, means)
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [
            {"method": m, "position": k, "mean_important": v}
            for m, vals in means.items()
            for k, v in enumerate(vals)
        ]
        write_table(out / "paths.tsv", rows, ("method", "position", "mean_important"))
        dump_json(
            _manifest(cfg, {"verb": "paths", "failed_replicates": [r.replicate for r in res.failures]}),
            out / "manifest.json",
        )
    return res


@dataclass
class RealReport:
    dataset: Dataset
    trace: object
    regime: Regime
    assignments: np.ndarray
    values: dict  # regime label -> IPW value
    differences: dict  # label -> (diff, lo, hi)
    propensity: np.ndarray


def resolve_propensity(d: Dataset, cfg: RealDataConfig, table_path=None) -> np.ndarray:
    if cfg.propensity is None:
        return np.full(d.n, treatment_fraction(d))
    if isinstance(cfg.propensity, (int, float)):
        return np.full(d.n, float(cfg.propensity))
    col = read_dataset_csv(
        table_path or cfg.data, cfg.outcome, cfg.treatment, [cfg.propensity], cfg.treatment_labels
    ).covariates[:, 0]
    return col


def run_real(cfg: RealDataConfig, write: bool = True) -> RealReport:
    """Select prescriptive columns of a CSV dataset and evaluate the regime by IPW."""
    covs = None if cfg.covariates == "all" else list(cfg.covariates)
    if covs is None and isinstance(cfg.propensity, str):
        covs = _all_but(cfg, [cfg.propensity])
    d = read_dataset_csv(cfg.data, cfg.outcome, cfg.treatment, covs, cfg.treatment_labels)
    findings = validate_dataset(d)
    if findings:
        raise FormatError(f"{cfg.data}: " + "; ".join(findings))
    prop = resolve_propensity(d, cfg)
    pi = float(cfg.propensity) if isinstance(cfg.propensity, (int, float)) else None
    trace = sas_select(d, pi, cfg.cutoff)
    model = fit_q_model(d, trace.selected)
    regime = regime_from_q(model, "sas")
    const = {a: Regime.constant(a) for a in (0, 1)}
    values = {
        "sas": ipw_value(d, regime, prop),
        "all-0": ipw_value(d, const[0], prop),
        "all-1": ipw_value(d, const[1], prop),
    }
    diffs = {}
    for k, a in enumerate((0, 1)):
        diffs[f"sas-vs-all-{a}"] = bootstrap_value_diff(
            d, regime, const[a], prop, cfg.bootstrap, child_seed(cfg.seed, k)
        )
    rep = RealReport(d, trace, regime, regime.actions(d.covariates), values, diffs, prop)
    if write:
        write_real(rep, cfg)
    return rep


def _all_but(cfg: RealDataConfig, extra) -> list[str]:
    import csv

    with open(cfg.data, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    drop = {cfg.outcome, cfg.treatment, *extra}
    return [h for h in header if h not in drop]


def write_real(rep: RealReport, cfg: RealDataConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    d, trace = rep.dataset, rep.trace
    rows = [
        {"step": k + 1, "column": d.name_of(s.index), "advantage": s.advantage,
         "prop": s.prop, "selected": int(k < trace.p_star)}
        for k, s in enumerate(trace.steps)
    ]
    write_table(out / "selection.tsv", rows, ("step", "column", "advantage", "prop", "selected"))
    write_table(
        out / "assignments.tsv",
        [{"row": i + 1, "action": int(a)} for i, a in enumerate(rep.assignments)],
        ("row", "action"),
    )
    vrows = [{"regime": k, "ipw_value": v} for k, v in rep.values.items()]
    write_table(out / "values.tsv", vrows, ("regime", "ipw_value"))
    drows = [
        {"comparison": k, "difference": v[0], "ci_low": v[1], "ci_high": v[2]}
        for k, v in rep.differences.items()
    ]
    write_table(out / "differences.tsv", drows, ("comparison", "difference", "ci_low", "ci_high"))
    lines = []
    for j in trace.selected:
        l0, l1 = arm_regressions(d, j)
        lines.append({"column": d.name_of(j), "arm": 0, "intercept": l0.intercept, "slope": l0.slope, "n": l0.n})
        lines.append({"column": d.name_of(j), "arm": 1, "intercept": l1.intercept, "slope": l1.slope, "n": l1.n})
    write_table(out / "arm_lines.tsv", lines, ("column", "arm", "intercept", "slope", "n"))
    dump_json(trace_to_dict(trace), out / "trace.json")
    dump_json(_manifest(cfg, {"verb": "select"}), out / "manifest.json")
    return out


def format_real(rep: RealReport) -> str:
    d, t = rep.dataset, rep.trace
    names = ", ".join(d.name_of(j) for j in t.selected) or "(none)"
    n1 = int(rep.assignments.sum())
    lines = [
        f"subjects: {d.n}  covariates: {d.p}",
        f"selected {t.p_star} covariate(s) [stop: {t.stop_reason}]: {names}",
        f"regime assigns {n1} to treatment 1 and {d.n - n1} to treatment 0",
    ]
    for k, v in rep.values.items():
        lines.append(f"IPW value {k:>6}: {v:.4f}")
    for k, (diff, lo, hi) in rep.differences.items():
        lines.append(f"{k}: {diff:.4f}  95% CI ({lo:.4f}, {hi:.4f})")
    return "\n".join(lines) + "\n"
