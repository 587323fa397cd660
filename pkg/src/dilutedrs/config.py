"""Experiment configuration: JSON schema, defaults and model construction."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

import jsonschema
import numpy as np

from .errors import ConfigError
from .models import (
    FAMILIES,
    ModelSpec,
    ScalarLaw,
    custom_table_model,
    hardcore_soft_model,
    ksat_model,
    load_custom_table,
    nae_ksat_model,
    perceptron_model,
    potts_model,
    pspin_model,
    xy_model,
)
from .spin import SpinSpace

_law = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {
                "law": {"enum": ["constant", "rademacher", "finite", "gaussian"]},
                "value": {"type": "number"},
                "scale": {"type": "number"},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "probs": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "mu": {"type": "number"},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "bound": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["law"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "properties": {
                "family": {"enum": list(FAMILIES) + ["hardcore"]},
                "p": {"type": "integer", "minimum": 2},
                "alpha": {"type": "number", "minimum": 0},
                "beta": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                                   {"const": "inf"}]},
                "h": {"type": "number"},
                "J": _law,
                "g": _law,
                "clause_law": {"oneOf": [{"const": "uniform"},
                                         {"type": "array", "items": {"type": "number"}}]},
                "kappa": {"type": "number"},
                "variant": {"enum": ["le", "ge"]},
                "q": {"type": "integer", "minimum": 2},
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "grid": {"type": "integer", "minimum": 3},
                "table": {"type": "string"},
                "spins": {"type": "array", "items": {"type": "number"}, "minItems": 2},
            },
            "required": ["family", "alpha"],
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "M": {"type": "integer", "minimum": 100},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "window": {"type": "integer", "minimum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
                "initial": {"type": "string"},
                "damping": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "n_samples": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "N": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
                "instances": {"type": "integer", "minimum": 1},
                "sweeps": {"type": "integer", "minimum": 4},
                "chains": {"type": "integer", "minimum": 2},
                "t": {"type": "number"},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "shots": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "plot": {"type": "boolean"}},
            "additionalProperties": False,
        },
    },
    "required": ["seed", "model"],
    "additionalProperties": False,
}

SOLVER_DEFAULTS = {"M": 10_000, "tol": 1e-3, "window": 10, "max_iter": 2000,
                   "initial": "zero", "damping": 0.0, "n_samples": 100_000}
ORACLE_DEFAULTS = {"N": [8, 12], "instances": 50, "sweeps": 400, "chains": 32,
                   "t": 0.25, "epsilon": 0.05, "shots": 200_000}
OUTPUT_DEFAULTS = {"dir": "out", "plot": False}

# keys each family understands beyond family/alpha/beta
FAMILY_KEYS = {
    "pspin": {"p", "J", "h"},
    "ksat": {"p", "h", "clause_law"},
    "nae_ksat": {"p", "clause_law"},
    "perceptron_sym": {"p", "g", "kappa", "variant", "h"},
    "perceptron_asym": {"p", "g", "kappa", "h"},
    "potts": {"p", "q", "J", "h"},
    "xy": {"J", "h", "grid"},
    "hardcore_soft": {"eta", "grid"},
    "hardcore": {"eta", "grid"},
    "custom_table": {"table", "spins"},
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(x) for x in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        where = _path(err)
        raise ConfigError(f"unknown key(s) {extra} in {where}")
    if err.validator == "required":
        raise ConfigError(f"{_path(err)}: {err.message}")
    raise ConfigError(f"invalid value at {_path(err)}: {err.message}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    model: dict
    solver: dict
    oracle: dict
    output: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        validate(doc)
        fam = doc["model"]["family"]
        stray = set(doc["model"]) - {"family", "alpha", "beta"} - FAMILY_KEYS[fam]
        if stray:
            raise ConfigError(f"unknown key(s) {sorted(stray)} in model for family {fam!r}")
        return cls(
            experiment=doc.get("experiment", "experiment"),
            seed=int(doc["seed"]),
            model=copy.deepcopy(doc["model"]),
            solver={**SOLVER_DEFAULTS, **doc.get("solver", {})},
            oracle={**ORACLE_DEFAULTS, **doc.get("oracle", {})},
            output={**OUTPUT_DEFAULTS, **doc.get("output", {})},
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "model": copy.deepcopy(self.model),
            "solver": dict(self.solver),
            "oracle": dict(self.oracle),
            "output": dict(self.output),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, seed=None, grid=None) -> "ExperimentConfig":
        doc = self.to_dict()
        if seed is not None:
            doc["seed"] = int(seed)
        if grid is not None:
            if "grid" not in FAMILY_KEYS[doc["model"]["family"]]:
                raise ConfigError(f"--grid does not apply to family {doc['model']['family']!r}")
            doc["model"]["grid"] = int(grid)
        return ExperimentConfig.from_dict(doc)


def _beta(m: dict) -> float:
    b = m.get("beta", 1.0)
    return math.inf if b == "inf" else float(b)


def build_model(m: dict, beta: float | None = None) -> ModelSpec:
    """ModelSpec from a validated ``model`` section."""
    fam = m["family"]
    alpha = float(m["alpha"])
    beta = _beta(m) if beta is None else beta
    law = (lambda key: ScalarLaw.from_config(m[key]) if key in m else ScalarLaw.constant(1.0))
    h = float(m.get("h", 0.0))
    name = fam
    clause_law = m.get("clause_law")
    if clause_law == "uniform":
        clause_law = None
    if fam == "pspin":
        return pspin_model(m.get("p", 2), alpha, beta, law("J"), h, name)
    if fam == "ksat":
        return ksat_model(m.get("p", 2), alpha, beta, h, clause_law, name)
    if fam == "nae_ksat":
        return nae_ksat_model(m.get("p", 3), alpha, beta, clause_law, name)
    if fam in ("perceptron_sym", "perceptron_asym"):
        g = ScalarLaw.from_config(m["g"]) if "g" in m else ScalarLaw.rademacher()
        return perceptron_model(m.get("p", 2), alpha, beta, g, m.get("kappa", 0.0),
                                fam == "perceptron_sym", m.get("variant", "le"), h, name)
    if fam == "potts":
        if m.get("p", 2) != 2:
            raise ConfigError("Potts builder supports p = 2")
        return potts_model(m.get("q", 3), alpha, beta, law("J"), h, name)
    if fam == "xy":
        return xy_model(alpha, beta, law("J"), h, m.get("grid", 64), name)
    if fam in ("hardcore_soft", "hardcore"):
        return hardcore_soft_model(alpha, beta, m.get("eta", 1.0), m.get("grid", 64), name)
    if fam == "custom_table":
        if "table" not in m:
            raise ConfigError("custom_table needs a 'table' CSV path")
        space = SpinSpace(np.asarray(m.get("spins", [-1.0, 1.0]), dtype=float))
        return custom_table_model(load_custom_table(m["table"], space), space, alpha, beta,
                                  name=name)
    raise ConfigError(f"unknown family {fam!r}")
