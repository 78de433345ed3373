"""Run configuration: JSON schema, parsing and the fully resolved echo."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .freq import DEFAULT_OMEGA_HI, DEFAULT_OMEGA_LO, DEFAULT_POINTS
from .model import ModelError, NominalGains, PlantModel, SymbioticConfig, Variant
from .simulate import DEFAULT_DT, DEFAULT_T_FINAL, Constant, FilteredSquareWave, Sinusoid, Zero


class ConfigError(ValueError):
    pass


_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}, "minItems": 1}
_vector = {"type": "array", "items": {"type": "number"}}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_range = {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2}

_signal = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["zero", "constant", "sinusoid", "filtered_square_wave"]},
        "level": {"type": "number"},
        "offset": {"type": "number"},
        "amplitude": {"type": "number"},
        "omega": _pos,
        "period_s": _pos,
        "filter_pole": _pos,
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "symbiotic run configuration",
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "plant": {
            "type": "object",
            "properties": {"A": _matrix, "B": _matrix, "x0": _vector},
            "additionalProperties": False,
        },
        "gains": {
            "type": "object",
            "properties": {"K1": _matrix, "K2": _matrix},
            "additionalProperties": False,
        },
        "control": {
            "type": "object",
            "properties": {
                "alpha": _pos,
                "eps1": _nonneg,
                "eps2": _pos,
                "beta1": _pos,
                "beta2": _pos,
                "beta3": _pos,
                "mu1": _nonneg,
                "mu2": _nonneg,
                "R": _matrix,
                "variant": {"enum": ["SFG", "NFG"]},
            },
            "additionalProperties": False,
        },
        "signals": {
            "type": "object",
            "properties": {"reference": _signal, "disturbance": _signal},
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {"dt": _pos, "t_final": _pos},
            "additionalProperties": False,
        },
        "frequency": {
            "type": "object",
            "properties": {"omega_lo": _pos, "omega_hi": _pos, "points": {"type": "integer", "minimum": 2}},
            "additionalProperties": False,
        },
        "certificate": {
            "type": "object",
            "properties": {"d1": {"type": ["number", "null"]}, "d2": {"type": ["number", "null"]}},
            "additionalProperties": False,
        },
        "experiment": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["alpha_study", "eps_grid", "single_run", "iso_cost"]},
                "alphas": {"type": "array", "items": _pos},
                "eps1_range": _range,
                "eps2_range": _range,
                "steps": {
                    "oneOf": [
                        {"type": "integer", "minimum": 2},
                        {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2, "maxItems": 2},
                    ]
                },
                "target_cost": _nonneg,
                "tolerance": _nonneg,
            },
            "additionalProperties": False,
        },
        "output_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "plant": {"A": [[0.0, 1.0], [0.0, 0.0]], "B": [[0.0], [1.0]], "x0": None},
    "gains": {"K1": [[0.16, 0.57]], "K2": [[0.16]]},
    "control": {
        "alpha": 10.0,
        "eps1": 3.0,
        "eps2": 10.0,
        "beta1": 0.1,
        "beta2": 3.0,
        "beta3": 1.0,
        "mu1": 0.0,
        "mu2": 0.0,
        "R": None,
        "variant": "NFG",
    },
    "signals": {
        "reference": {"kind": "filtered_square_wave", "amplitude": 1.0, "period_s": 40.0, "filter_pole": 0.5},
        "disturbance": {"kind": "constant", "level": 10.0},
    },
    "simulation": {"dt": DEFAULT_DT, "t_final": DEFAULT_T_FINAL},
    "frequency": {"omega_lo": DEFAULT_OMEGA_LO, "omega_hi": DEFAULT_OMEGA_HI, "points": DEFAULT_POINTS},
    "certificate": {"d1": None, "d2": None},
    "output_dir": "out",
}

EXPERIMENT_DEFAULTS = {
    "alpha_study": {"alphas": [1.0, 5.0, 10.0]},
    "eps_grid": {"eps1_range": [0.5, 10.0], "eps2_range": [1.0, 50.0], "steps": [10, 10]},
    "iso_cost": {
        "eps1_range": [0.5, 10.0],
        "eps2_range": [1.0, 50.0],
        "steps": [10, 10],
        "target_cost": 0.1,
        "tolerance": 0.1,
    },
    "single_run": {},
}


@dataclass(frozen=True)
class AlphaStudy:
    alphas: tuple[float, ...]


@dataclass(frozen=True)
class EpsGrid:
    eps1_range: tuple[float, float]
    eps2_range: tuple[float, float]
    steps: tuple[int, int]

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(*self.eps1_range, self.steps[0]),
            np.linspace(*self.eps2_range, self.steps[1]),
        )


@dataclass(frozen=True)
class IsoCost(EpsGrid):
    target_cost: float = 0.1
    tolerance: float = 0.1


@dataclass(frozen=True)
class SingleRun:
    pass


Experiment = AlphaStudy | EpsGrid | IsoCost | SingleRun


@dataclass(frozen=True)
class RunConfig:
    plant: PlantModel
    gains: NominalGains
    control: SymbioticConfig
    reference: object
    disturbance: object
    experiment: Experiment
    dt: float = DEFAULT_DT
    t_final: float = DEFAULT_T_FINAL
    omega_lo: float = DEFAULT_OMEGA_LO
    omega_hi: float = DEFAULT_OMEGA_HI
    points: int = DEFAULT_POINTS
    d1: float | None = None
    d2: float | None = None
    output_dir: str = "out"
    resolved: dict = field(default_factory=dict, repr=False, compare=False)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("reference", "disturbance"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_signal(spec: dict):
    kind = spec["kind"]
    try:
        if kind == "zero":
            return Zero()
        if kind == "constant":
            return Constant(float(spec.get("level", 0.0)))
        if kind == "sinusoid":
            return Sinusoid(float(spec.get("offset", 0.0)), float(spec.get("amplitude", 1.0)), float(spec.get("omega", 1.0)))
        return FilteredSquareWave(
            float(spec.get("amplitude", 1.0)), float(spec.get("period_s", 40.0)), float(spec.get("filter_pole", 0.5))
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad signal {spec}: {exc}") from exc


def resolve(raw: dict) -> dict:
    """Validate `raw` against the schema and fill in every default."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from exc
    full = _merge(DEFAULTS, {k: v for k, v in raw.items() if k != "experiment"})
    kind = raw["experiment"]["kind"]
    full["experiment"] = {"kind": kind, **EXPERIMENT_DEFAULTS[kind]}
    full["experiment"].update(raw["experiment"])
    exp = full["experiment"]
    if isinstance(exp.get("steps"), int):
        exp["steps"] = [exp["steps"], exp["steps"]]
    if kind == "alpha_study" and not exp["alphas"]:
        raise ConfigError("experiment/alphas: must be nonempty")
    for key in ("eps1_range", "eps2_range"):
        if key in exp and exp[key][0] > exp[key][1]:
            raise ConfigError(f"experiment/{key}: lower bound exceeds upper bound")
    if full["frequency"]["omega_hi"] <= full["frequency"]["omega_lo"]:
        raise ConfigError("frequency: omega_hi must exceed omega_lo")
    if full["simulation"]["t_final"] < full["simulation"]["dt"]:
        raise ConfigError("simulation: t_final must be at least dt")
    return full


def build(full: dict) -> RunConfig:
    try:
        plant = PlantModel(**full["plant"])
        gains = NominalGains(**full["gains"])
        control = SymbioticConfig(**{**full["control"], "variant": Variant(full["control"]["variant"])})
        gains.reference_model(plant)
    except (ModelError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    exp = full["experiment"]
    kind = exp["kind"]
    if kind == "alpha_study":
        experiment: Experiment = AlphaStudy(tuple(float(a) for a in exp["alphas"]))
    elif kind == "single_run":
        experiment = SingleRun()
    else:
        grid = dict(
            eps1_range=tuple(exp["eps1_range"]),
            eps2_range=tuple(exp["eps2_range"]),
            steps=tuple(exp["steps"]),
        )
        if kind == "eps_grid":
            experiment = EpsGrid(**grid)
        else:
            experiment = IsoCost(**grid, target_cost=exp["target_cost"], tolerance=exp["tolerance"])
    return RunConfig(
        plant=plant,
        gains=gains,
        control=control,
        reference=parse_signal(full["signals"]["reference"]),
        disturbance=parse_signal(full["signals"]["disturbance"]),
        experiment=experiment,
        dt=full["simulation"]["dt"],
        t_final=full["simulation"]["t_final"],
        omega_lo=full["frequency"]["omega_lo"],
        omega_hi=full["frequency"]["omega_hi"],
        points=full["frequency"]["points"],
        d1=full["certificate"]["d1"],
        d2=full["certificate"]["d2"],
        output_dir=full["output_dir"],
        resolved=full,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return build(resolve(raw))


def default_config(**experiment) -> RunConfig:
    """The double-integrator setup used throughout the experiments."""
    experiment = experiment or {"kind": "single_run"}
    return build(resolve({"experiment": experiment}))
