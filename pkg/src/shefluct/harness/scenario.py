"""Scenario description, the versioned JSON schema and application presets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import jsonschema
import numpy as np

from ..coefficients import DiffusionCoefficient, coefficient_from_spec
from ..grid import TorusGrid, build_grid

__all__ = ["Scenario", "SCHEMA", "ConfigError", "validate_document", "preset", "PRESETS", "initial_datum", "scenario_from_document"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Scenario document violates the schema; ``path`` points at the offending entry."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

_U0 = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {"kind": {"const": "constant"}, "value": _number},
            "required": ["kind", "value"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "cosine"},
                "mean": _number,
                "amplitude": _number,
                "mode": {"type": "integer", "minimum": 0},
            },
            "required": ["kind", "mean", "amplitude"],
            "additionalProperties": False,
        },
    ]
}

_SCHEDULE = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "fixed"}, "delta": _nonneg},
            "required": ["kind", "delta"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "power"}, "a": _pos, "c": _pos},
            "required": ["kind", "a"],
            "additionalProperties": False,
        },
    ]
}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "d": {"enum": [1, 2, 3]},
        "N": {"type": "integer", "minimum": 4, "multipleOf": 2},
        "dt": _pos,
        "T": _pos,
        "coefficient": {
            "oneOf": [
                {"type": "string"},
                {"type": "object", "properties": {"name": {"type": "string"}}, "required": ["name"]},
            ]
        },
        "u0": _U0,
        "eps": _nonneg,
        "delta": _nonneg,
        "n": {"type": "integer", "minimum": 0, "maximum": 6},
        "conservative": {"type": "boolean"},
        "gamma": {"oneOf": [_pos, {"type": "null"}]},
        "gamma_margin": {"oneOf": [_pos, {"type": "null"}]},
        "n_moll": {"type": "integer", "minimum": 1},
        "dealias": {"type": "boolean"},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "epsilons": {"type": "array", "items": _nonneg, "minItems": 1},
        "deltas": {"type": "array", "items": _pos, "minItems": 1},
        "schedule": _SCHEDULE,
        "p": {"type": "number", "minimum": 1},
        "estimator": {"enum": ["pointwise-sup", "space-time-Lp", "terminal-mean"]},
        "quantity": {"enum": ["remainder", "scaled-remainder", "coefficient"]},
        "case": {"enum": [1, 2]},
        "tolerance": _pos,
        "predicted": _number,
        "expect_slope": _number,
        "min_r2": {"type": "number", "minimum": 0, "maximum": 1},
        "max_ratio_spread": _pos,
        "min_final_survival": {"type": "number", "minimum": 0, "maximum": 1},
        "samples": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "preset": {"type": "string"},
        "scenario": SCENARIO_SCHEMA,
        "experiment": EXPERIMENT_SCHEMA,
    },
    "required": ["schema"],
    "additionalProperties": False,
}


def validate_document(doc) -> None:
    """Raise ConfigError carrying a JSON path to the first (deepest) violation."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = list(validator.iter_errors(doc))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(err.message, err.json_path)


def initial_datum(spec, grid: TorusGrid) -> np.ndarray:
    if isinstance(spec, (int, float)):
        return np.full(grid.shape, float(spec))
    kind = spec["kind"]
    if kind == "constant":
        return np.full(grid.shape, float(spec["value"]))
    if kind == "cosine":
        x = grid.coordinates()[0]
        k = int(spec.get("mode", 1))
        return float(spec["mean"]) + float(spec["amplitude"]) * np.cos(2 * np.pi * k * x)
    raise ConfigError(f"unknown initial datum kind {kind!r}", "$.scenario.u0")


@dataclass(frozen=True)
class Scenario:
    name: str = "custom"
    d: int = 1
    N: int = 128
    dt: float = 1e-3
    T: float = 0.25
    coefficient: dict | str = "cosine"
    u0: dict | float = 1.0
    eps: float = 0.0
    delta: float = 0.0
    n: int = 0
    conservative: bool = False
    gamma: float | None = None
    gamma_margin: float | None = None
    n_moll: int = 1
    dealias: bool = False

    def __post_init__(self):
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"T={self.T} is not a multiple of dt={self.dt}", "$.scenario.T")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def case(self) -> int:
        return 2 if self.conservative else 1

    def grid(self) -> TorusGrid:
        return build_grid(self.d, self.N)

    def G(self) -> DiffusionCoefficient:
        try:
            return coefficient_from_spec(self.coefficient)
        except KeyError as exc:
            raise ConfigError(str(exc), "$.scenario.coefficient") from None

    def initial(self) -> np.ndarray:
        return initial_datum(self.u0, self.grid())

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(**data)


PRESETS: dict[str, Scenario] = {
    "dawson-watanabe": Scenario(
        name="dawson-watanabe", coefficient="sqrt", u0=1.0, conservative=False,
        gamma=0.5, gamma_margin=0.25, delta=0.1, eps=1e-3,
    ),
    "fleming-viot": Scenario(
        name="fleming-viot", coefficient="logistic-sqrt", u0=0.5, conservative=False,
        gamma=0.2, gamma_margin=0.1, delta=0.1, eps=1e-3,
    ),
    "ssep": Scenario(
        name="ssep", coefficient="logistic-sqrt", u0=0.5, conservative=True,
        gamma=0.2, gamma_margin=0.1, delta=0.1, eps=1e-4,
    ),
    "dean-kawasaki": Scenario(
        name="dean-kawasaki", coefficient="sqrt", u0=1.0, conservative=True,
        gamma=0.5, gamma_margin=0.25, delta=0.1, eps=1e-4,
    ),
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def scenario_from_document(doc: dict) -> Scenario:
    validate_document(doc)
    try:
        base = preset(doc["preset"]) if "preset" in doc else Scenario()
    except KeyError as exc:
        raise ConfigError(exc.args[0], "$.preset") from None
    return base.with_(**doc.get("scenario", {}))
