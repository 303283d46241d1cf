"""YAML run configurations, validated against JSON schemas."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import jsonschema
import yaml

from .data import GenerativeSpec
from .simgen import make_spec, scenario

METHODS = ("sas", "sscore-all", "sscore-topk", "lasso")


class ConfigError(ValueError):
    pass


_SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "model": {"enum": ["I", "II", "III"]},
        "beta": {
            "oneOf": [
                {"enum": ["sparse3", "sparse8"]},
                {
                    "type": "object",
                    "patternProperties": {"^[0-9]+$": {"type": "number"}},
                    "additionalProperties": False,
                },
            ]
        },
        "beta0": {"type": "number"},
        "rho": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "assignment": {
            "oneOf": [
                {"enum": ["rct", "obs"]},
                {
                    "type": "object",
                    "properties": {
                        "randomized": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
                    },
                    "required": ["randomized"],
                    "additionalProperties": False,
                },
            ]
        },
        "noise_sd": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": {"type": "string"},
        "spec": _SPEC_SCHEMA,
        "n": {"type": "integer", "minimum": 4},
        "p": {"type": "integer", "minimum": 1},
        "methods": {
            "type": "array",
            "items": {"enum": list(METHODS)},
            "minItems": 1,
            "uniqueItems": True,
        },
        "replications": {"type": "integer", "minimum": 1},
        "cutoff": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "mc_reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "folds": {"type": "integer", "minimum": 2},
        "path_length": {"type": "integer", "minimum": 1},
        "tdr_empty": {"enum": ["skip", "zero"]},
    },
    "additionalProperties": False,
    "oneOf": [{"required": ["scenario"]}, {"required": ["spec"]}],
}

REAL_SCHEMA = {
    "type": "object",
    "properties": {
        "data": {"type": "string"},
        "outcome": {"type": "string"},
        "treatment": {"type": "string"},
        "treatment_labels": {
            "type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2
        },
        "covariates": {
            "oneOf": [{"const": "all"}, {"type": "array", "items": {"type": "string"}, "minItems": 1}]
        },
        "propensity": {
            "oneOf": [
                {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                {"type": "string"},
                {"type": "null"},
            ]
        },
        "bootstrap": {"type": "integer", "minimum": 100},
        "cutoff": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
    "required": ["data", "outcome", "treatment"],
    "additionalProperties": False,
}


def _validate(obj, schema, source):
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<top>"
        raise ConfigError(f"{source}: {where}: {exc.message}") from None


def load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            obj = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return obj or {}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str | None = "I-sparse3-rho02-rct"
    spec: dict | None = None
    n: int = 200
    p: int = 1000
    methods: tuple[str, ...] = METHODS
    replications: int = 100
    cutoff: float = 0.01
    mc_reps: int = 10_000
    seed: int = 0
    jobs: int = 1
    out: str = "results"
    folds: int = 10
    path_length: int = 30
    tdr_empty: str = "skip"

    @classmethod
    def from_mapping(cls, obj: dict, source: str = "config") -> "ExperimentConfig":
        _validate(obj, EXPERIMENT_SCHEMA, source)
        obj = dict(obj)
        if "methods" in obj:
            obj["methods"] = tuple(obj["methods"])
        if "spec" in obj:
            obj.setdefault("scenario", None)
        cfg = cls(**obj)
        cfg.generative_spec()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(load_yaml(path), str(path))

    def override(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "methods" in kw:
            kw["methods"] = tuple(kw["methods"])
        if kw.get("spec") is not None:
            kw.setdefault("scenario", None)
        if kw.get("scenario") is not None:
            kw.setdefault("spec", None)
        merged = asdict(self)
        merged.update(kw)
        merged = {k: (list(v) if isinstance(v, tuple) else v) for k, v in merged.items() if v is not None}
        return self.from_mapping(merged, "command line")

    def generative_spec(self) -> GenerativeSpec:
        try:
            if self.scenario is not None:
                return scenario(self.scenario, n=self.n, p=self.p)
            s = dict(self.spec)
            beta = s.pop("beta", "sparse3")
            if isinstance(beta, dict):
                beta = {int(k): float(v) for k, v in beta.items()}
            return make_spec(
                model=s.get("model", "I"),
                beta=beta,
                rho=s.get("rho", 0.2),
                assignment=_assignment(s.get("assignment", "rct")),
                n=self.n,
                p=self.p,
                noise_sd=s.get("noise_sd", 0.5),
                beta0=s.get("beta0", 0.1),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def canonical(self) -> dict:
        """Settings that determine the results; ``out`` and ``jobs`` do not."""
        d = {k: v for k, v in asdict(self).items() if v is not None}
        d["methods"] = list(self.methods)
        del d["out"], d["jobs"]
        return d

    def digest(self) -> str:
        return _digest(self.canonical())


def _digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def _assignment(a):
    if isinstance(a, dict):
        from .data import Randomized

        return Randomized(float(a["randomized"]))
    return a


@dataclass(frozen=True)
class RealDataConfig:
    data: str
    outcome: str
    treatment: str
    treatment_labels: tuple[str, str] | None = None
    covariates: tuple[str, ...] | str = "all"
    propensity: float | str | None = None
    bootstrap: int = 1000
    cutoff: float = 0.01
    seed: int = 0
    out: str = "results"

    @classmethod
    def from_mapping(cls, obj: dict, source: str = "config") -> "RealDataConfig":
        _validate(obj, REAL_SCHEMA, source)
        obj = dict(obj)
        if isinstance(obj.get("covariates"), list):
            obj["covariates"] = tuple(obj["covariates"])
        if obj.get("treatment_labels") is not None:
            obj["treatment_labels"] = tuple(obj["treatment_labels"])
        return cls(**obj)

    @classmethod
    def from_file(cls, path) -> "RealDataConfig":
        return cls.from_mapping(load_yaml(path), str(path))

    def override(self, **kw) -> "RealDataConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        merged = {k: v for k, v in asdict(self).items() if v is not None}
        merged.update(kw)
        merged = {k: (list(v) if isinstance(v, tuple) else v) for k, v in merged.items()}
        return self.from_mapping(merged, "command line")

    def canonical(self) -> dict:
        d = asdict(self)
        for k in ("covariates", "treatment_labels"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        del d["out"]
        return d

    def digest(self) -> str:
        return _digest(self.canonical())
