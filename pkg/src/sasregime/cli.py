"""Command-line entry point: ``sasregime {simulate,paths,select,validate}``.

Exit status is 0 on success, 1 on a configuration or input error and 2 when
some simulation replicates failed (they are recorded and excluded).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import METHODS, ConfigError, ExperimentConfig, RealDataConfig
from .data import validate_dataset
from .formats import FormatError, read_dataset_csv

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("sasregime")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML configuration file")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--cutoff", type=float, help="stopping cutoff c (default 0.01)")
    p.add_argument("--out", metavar="DIR", help="output directory")


def _sim_args(p: argparse.ArgumentParser) -> None:
    _common(p)
    p.add_argument("--scenario", help="scenario key such as I-sparse3-rho02-rct")
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--reps", type=int, help="number of replications (default 100)")
    p.add_argument("--mc-reps", type=int, help="Monte-Carlo sample size for values (default 10000)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--n", type=int, help="subjects per dataset (default 200)")
    p.add_argument("--p", type=int, help="covariates (default 1000)")
    p.add_argument("--folds", type=int, help="LASSO cross-validation folds (default 10)")
    p.add_argument("--path-length", type=int, help="solution path positions (default 30)")
    p.add_argument(
        "--tdr-empty", choices=("skip", "zero"),
        help="aggregate an empty selection's undefined TDR by skipping it or counting 0",
    )


def _data_args(p: argparse.ArgumentParser, full: bool = True) -> None:
    p.add_argument("--data", metavar="CSV", help="input CSV with a header row")
    p.add_argument("--outcome", help="outcome column")
    p.add_argument("--treatment", help="treatment column")
    p.add_argument("--labels", metavar="L0,L1", help="treatment labels mapped to 0 and 1")
    p.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")
    if full:
        p.add_argument(
            "--propensity",
            help="P(A=1|X): a constant in (0,1) or a column name (default: treated fraction)",
        )
        p.add_argument("--bootstrap", type=int, help="bootstrap resamples (default 1000)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sasregime",
        description="Sequential advantage selection for optimal treatment regimes.",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    _sim_args(sub.add_parser("simulate", help="replicated simulation study and summary table"))
    _sim_args(sub.add_parser("paths", help="solution-path table of important-variable counts"))
    sel = sub.add_parser("select", help="run selection and IPW evaluation on a CSV dataset")
    _common(sel)
    _data_args(sel)
    val = sub.add_parser("validate", help="lint a CSV dataset")
    val.add_argument("--config", metavar="PATH")
    _data_args(val, full=False)
    return ap


def _split(s):
    return None if s is None else [t.strip() for t in s.split(",") if t.strip()]


def experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return cfg.override(
        scenario=args.scenario,
        methods=_split(args.methods),
        replications=args.reps,
        cutoff=args.cutoff,
        mc_reps=args.mc_reps,
        seed=args.seed,
        jobs=args.jobs,
        out=args.out,
        n=args.n,
        p=args.p,
        folds=args.folds,
        path_length=args.path_length,
        tdr_empty=args.tdr_empty,
    )


def _propensity(text):
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        return text


def real_config(args) -> RealDataConfig:
    base = {}
    if args.config:
        from .config import load_yaml

        base = load_yaml(args.config)
    kw = {
        "data": args.data,
        "outcome": args.outcome,
        "treatment": args.treatment,
        "treatment_labels": _split(args.labels),
        "covariates": _split(args.covariates),
        "propensity": _propensity(getattr(args, "propensity", None)),
        "bootstrap": getattr(args, "bootstrap", None),
        "cutoff": getattr(args, "cutoff", None),
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
    }
    base.update({k: v for k, v in kw.items() if v is not None})
    return RealDataConfig.from_mapping(base, args.config or "command line")


def cmd_simulate(args) -> int:
    from .experiment import run_experiment

    cfg = experiment_config(args)
    res = run_experiment(cfg)
    with open(f"{cfg.out}/table.txt") as fh:
        sys.stdout.write(fh.read())
    if res.failures:
        log.error("%d of %d replicates failed", len(res.failures), cfg.replications)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_paths(args) -> int:
    from .experiment import run_paths

    cfg = experiment_config(args)
    res = run_paths(cfg)
    for method, vals in res.mean_counts.items():
        marks = [k for k in (5, 10, 20, 30) if k < len(vals)]
        cells = "  ".join(f"k={k}: {vals[k]:.2f}" for k in marks)
        print(f"{method:<12} {cells}")
    if res.failures:
        log.error("%d of %d replicates failed", len(res.failures), cfg.replications)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_select(args) -> int:
    from .experiment import format_real, run_real

    rep = run_real(real_config(args))
    sys.stdout.write(format_real(rep))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = real_config(args)
    covs = None if cfg.covariates == "all" else list(cfg.covariates)
    d = read_dataset_csv(cfg.data, cfg.outcome, cfg.treatment, covs, cfg.treatment_labels)
    findings = validate_dataset(d)
    n0, n1 = d.arm_counts()
    print(f"{cfg.data}: {d.n} rows, {d.p} covariates, arms 0/1 = {n0}/{n1}")
    for f in findings:
        print(f"  problem: {f}")
    return EXIT_CONFIG if findings else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "paths": cmd_paths,
    "select": cmd_select,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, FormatError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
