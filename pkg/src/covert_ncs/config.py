"""Experiment configuration: a flat TOML document with dotted keys.

Example::

    identify.loss_rates = [0.0, 0.2]
    identify.runs_per_rate = 30
    bsa.plant_iterations = 800
    experiment.seed = 7

Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bsa import BsaConfig
from .lti import TransferFunction
from .netsim import NcsModel


NON_SEMANTIC = ("experiment.out_dir", "experiment.jobs")


class ConfigError(ValueError):
    pass


def _key(section: str, name: str) -> str:
    return f"{section}.{name}"


@dataclass
class ExperimentConfig:
    controller_num: list = field(default_factory=lambda: [0.1701, -0.1673])
    controller_den: list = field(default_factory=lambda: [1.0, -1.0])
    plant_num: list = field(default_factory=lambda: [0.3379, 0.2793])
    plant_den: list = field(default_factory=lambda: [1.0, -1.5462, 0.5646])
    sample_rate: float = 50.0
    setpoint: float = 1.0
    capture_duration: float = 2.0
    loss_rates: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2])
    runs_per_rate: int = 100
    population_size: int = 100
    eta: float = 1.0
    mixrate: float = 1.0
    low: float = -10.0
    high: float = 10.0
    controller_iterations: int = 600
    plant_iterations: int = 800
    overshoot_pct: float = 50.0
    ess_pct: float = -10.0
    horizon: float = 20.0
    seed: int = 0
    jobs: int = 1
    out_dir: str = "out"

    # dotted key -> attribute
    KEYS = {
        "model.controller_num": "controller_num",
        "model.controller_den": "controller_den",
        "model.plant_num": "plant_num",
        "model.plant_den": "plant_den",
        "model.sample_rate": "sample_rate",
        "model.setpoint": "setpoint",
        "capture.duration": "capture_duration",
        "identify.loss_rates": "loss_rates",
        "identify.runs_per_rate": "runs_per_rate",
        "bsa.population_size": "population_size",
        "bsa.eta": "eta",
        "bsa.mixrate": "mixrate",
        "bsa.low": "low",
        "bsa.high": "high",
        "bsa.controller_iterations": "controller_iterations",
        "bsa.plant_iterations": "plant_iterations",
        "attack.overshoot_pct": "overshoot_pct",
        "attack.ess_pct": "ess_pct",
        "attack.horizon": "horizon",
        "experiment.seed": "seed",
        "experiment.jobs": "jobs",
        "experiment.out_dir": "out_dir",
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            for f in fields(self):
                val = getattr(self, f.name)
                if f.type == "float":
                    setattr(self, f.name, float(val))
                elif f.type == "int":
                    if isinstance(val, bool) or int(val) != val:
                        raise ConfigError(f"{f.name} must be an integer, got {val!r}")
                    setattr(self, f.name, int(val))
                elif f.type == "list":
                    setattr(self, f.name, [float(v) for v in val])
            self.model()
            self.plant_bsa()
            self.controller_bsa()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if any(not 0.0 <= r <= 1.0 for r in self.loss_rates) or not self.loss_rates:
            raise ConfigError("identify.loss_rates must be a non-empty list within [0, 1]")
        if self.runs_per_rate < 1:
            raise ConfigError("identify.runs_per_rate must be >= 1")
        if self.capture_duration <= 0 or self.horizon <= 0:
            raise ConfigError("durations must be positive")
        if self.jobs < 1:
            raise ConfigError("experiment.jobs must be >= 1")

    def model(self) -> NcsModel:
        return NcsModel(
            TransferFunction.normalized(self.controller_num, self.controller_den),
            TransferFunction.normalized(self.plant_num, self.plant_den),
            self.sample_rate, self.setpoint,
        )

    def _bsa(self, iterations: int, dim: int) -> BsaConfig:
        return BsaConfig(self.population_size, iterations, self.eta, ((self.low, self.high),) * dim,
                         self.mixrate, self.seed)

    def plant_bsa(self) -> BsaConfig:
        return self._bsa(self.plant_iterations, 4)

    def controller_bsa(self) -> BsaConfig:
        return self._bsa(self.controller_iterations, 2)

    def to_flat(self) -> dict[str, Any]:
        return {key: getattr(self, attr) for key, attr in self.KEYS.items()}

    def digest(self) -> str:
        """SHA-256 of the settings that affect results (not ``out_dir`` or ``jobs``)."""
        flat = {k: v for k, v in self.to_flat().items() if k not in NON_SEMANTIC}
        blob = json.dumps(flat, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(flat) - set(cls.KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**{cls.KEYS[k]: v for k, v in flat.items()})

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_flat(_flatten(doc))

    def dump(self, path) -> None:
        lines = [f"{k} = {json.dumps(v)}" for k, v in self.to_flat().items()]
        Path(path).write_text("\n".join(lines) + "\n")


def _flatten(doc: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        else:
            flat[key] = v
    return flat
