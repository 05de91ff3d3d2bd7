"""Pipeline configuration document (JSON) with validation.

A config document may be partial; anything it omits takes the shipped
default below.  Unknown keys and ill-typed values raise ConfigError naming
the offending dotted field, e.g. ``expert.kp_values``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArtifactError, ConfigError

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "plant": {
        "T_G": 0.1,
        "T_DG": 0.5,
        "H": 10.0,
        "D": 0.8,
        "R": 0.05,
        "f_base": 60.0,
        "ramp_limit": 0.5,
    },
    "simulation": {"duration": 60.0, "dt": 0.001},
    "expert": {
        "kp_values": [0.0, 2.0, 5.0, 10.0, 20.0],
        "ki_values": [5.0, 10.0, 15.0, 20.0],
        "cost": "ISE",
        "max_classes": 2,
        "magnitudes": {"start": 0.05, "stop": 0.40, "count": 26},
        "step_times": [10.0, 21.0],
        "sampling_period": 0.1,
        "capture_offset": 0.4,
        "capture_duration": 1.0,
    },
    "model": {"full_scale_hz": 2.0, "repetitions": 1, "layers": 4},
    "training": {
        "epochs": 300,
        "learning_rate": 0.5,
        "optimizer": "parameter_shift_gd",
        "restarts": 3,
        "n_test_events": 18,
    },
    "evaluation": {"shots": [100, 1000, 5000, 10000], "runs": 10},
    "deploy": {
        "update_period": 0.1,
        "backend": "exact",
        "shots": 10000,
        "pm_offset": 1.2,
        "decimate": 10,
    },
}


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict) and key != "magnitudes":
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def _num(doc, path, positive=False, nonneg=False, allow_none=False):
    v = doc
    for part in path.split("."):
        v = v[part]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be nonnegative, got {v!r}")
    return float(v)


def _int(doc, path, minimum=None):
    v = doc
    for part in path.split("."):
        v = v[part]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be at least {minimum}, got {v!r}")
    return v


def _num_list(doc, path, ascending=False, nonneg=True, integer=False):
    v = doc
    for part in path.split("."):
        v = v[part]
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a nonempty list")
    for x in v:
        bad = isinstance(x, bool) or not isinstance(x, int if integer else (int, float))
        if bad or not math.isfinite(x) or (nonneg and x < 0):
            raise ConfigError(path, f"invalid entry {x!r}")
    if ascending and any(b <= a for a, b in zip(v, v[1:])):
        raise ConfigError(path, "entries must be strictly ascending")
    return list(v)


@dataclass(frozen=True)
class PipelineConfig:
    doc: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config document must be a JSON object")
        if "schema_version" in doc and doc["schema_version"] != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {doc['schema_version']!r}")
        merged = _merge(DEFAULTS, doc)
        validate(merged)
        return cls(merged)

    @classmethod
    def default(cls) -> "PipelineConfig":
        return cls.from_dict({})

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ArtifactError(f"missing config document: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"not valid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def with_seed(self, seed: int | None) -> "PipelineConfig":
        if seed is None:
            return self
        doc = copy.deepcopy(self.doc)
        doc["seed"] = seed
        return PipelineConfig.from_dict(doc)

    def __getitem__(self, key):
        return self.doc[key]

    @property
    def seed(self) -> int:
        return self.doc["seed"]

    # -- typed views -------------------------------------------------------

    def plant_params(self):
        from .plant import PlantParams

        return PlantParams(**self.doc["plant"])

    def grid(self):
        from .expert import GainGrid

        e = self.doc["expert"]
        return GainGrid(tuple(e["kp_values"]), tuple(e["ki_values"]))

    def magnitudes(self) -> np.ndarray:
        m = self.doc["expert"]["magnitudes"]
        if isinstance(m, list):
            return np.array(m, dtype=float)
        return np.round(np.linspace(m["start"], m["stop"], m["count"]), 6)

    def events(self):
        from .expert import event_catalog

        return event_catalog(self.magnitudes(), tuple(self.doc["expert"]["step_times"]))

    def model(self, n_classes: int):
        from .vqc import AnsatzSpec, FeatureMapSpec, VqcModel

        m = self.doc["model"]
        return VqcModel(
            FeatureMapSpec(m["full_scale_hz"], m["repetitions"]),
            AnsatzSpec(m["layers"]),
            n_classes=n_classes,
            seed=self.seed,
        )

    def train_config(self):
        from .trainer import TrainConfig

        t = self.doc["training"]
        return TrainConfig(t["epochs"], t["learning_rate"], t["optimizer"], self.seed)

    def deploy_backend(self):
        from .vqc import Exact, Shots

        d = self.doc["deploy"]
        return Exact() if d["backend"] == "exact" else Shots(d["shots"], self.seed)


def validate(doc: dict) -> None:
    _int(doc, "seed", 0)
    for key in ("T_G", "T_DG", "H", "D", "R", "f_base"):
        _num(doc, f"plant.{key}", positive=True)
    _num(doc, "plant.ramp_limit", positive=True, allow_none=True)
    dur = _num(doc, "simulation.duration", positive=True)
    dt = _num(doc, "simulation.dt", positive=True)
    if dt >= dur:
        raise ConfigError("simulation.dt", "must be smaller than the duration")

    _num_list(doc, "expert.kp_values", ascending=True)
    _num_list(doc, "expert.ki_values", ascending=True)
    if doc["expert"]["cost"] not in ("ISE", "ITAE"):
        raise ConfigError("expert.cost", "must be 'ISE' or 'ITAE'")
    k = _int(doc, "expert.max_classes", 1)
    if k > 8:
        raise ConfigError("expert.max_classes", "at most 8 classes fit three qubits")
    mags = doc["expert"]["magnitudes"]
    if isinstance(mags, list):
        _num_list(doc, "expert.magnitudes", nonneg=False)
    elif isinstance(mags, dict):
        if set(mags) != {"start", "stop", "count"}:
            raise ConfigError("expert.magnitudes", "needs exactly start, stop and count")
        _num(doc, "expert.magnitudes.start")
        _num(doc, "expert.magnitudes.stop")
        _int(doc, "expert.magnitudes.count", 1)
    else:
        raise ConfigError("expert.magnitudes", "expected a list or {start, stop, count}")
    times = _num_list(doc, "expert.step_times", ascending=True)
    if max(times) >= dur:
        raise ConfigError("expert.step_times", "every step must fall inside the simulation horizon")
    for key in ("sampling_period", "capture_duration"):
        _num(doc, f"expert.{key}", positive=True)
    _num(doc, "expert.capture_offset", nonneg=True)

    _num(doc, "model.full_scale_hz", positive=True)
    _int(doc, "model.repetitions", 1)
    _int(doc, "model.layers", 1)

    _int(doc, "training.epochs", 0)
    _num(doc, "training.learning_rate", positive=True)
    if doc["training"]["optimizer"] not in ("parameter_shift_gd", "spsa"):
        raise ConfigError("training.optimizer", "must be 'parameter_shift_gd' or 'spsa'")
    _int(doc, "training.restarts", 1)
    _int(doc, "training.n_test_events", 1)

    _num_list(doc, "evaluation.shots", integer=True)
    if any(s <= 0 for s in doc["evaluation"]["shots"]):
        raise ConfigError("evaluation.shots", "shot counts must be positive")
    _int(doc, "evaluation.runs", 1)

    up = _num(doc, "deploy.update_period", positive=True)
    if up < dt:
        raise ConfigError("deploy.update_period", "must be at least simulation.dt")
    if doc["deploy"]["backend"] not in ("exact", "shots"):
        raise ConfigError("deploy.backend", "must be 'exact' or 'shots'")
    _int(doc, "deploy.shots", 1)
    _num(doc, "deploy.pm_offset")
    _int(doc, "deploy.decimate", 1)


def write_default(path) -> None:
    from .io import write_json

    write_json(path, DEFAULTS)
