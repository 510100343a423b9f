"""Experiment configuration: ``key=value`` files, flag overrides and seed derivation."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..errors import SpecError

IMPUTER_METHODS = ("zero", "constant", "mean", "knn", "iterative")
NETWORK_METHODS = ("promissing", "m_promissing")
EXPERIMENTS = ("xor", "benchmark", "fusion", "explain")
OUT_DIR_ENV = "MISSNET_OUT_DIR"


def method_name(method: str) -> str:
    return method.split(":", 1)[0].strip().lower()


def is_imputer(method: str) -> bool:
    return method_name(method) in IMPUTER_METHODS


def repetition_seed(master_seed: int, repetition: int) -> int:
    """Seed of repetition ``r``: an integer in [0, 100000] drawn from a generator
    seeded with ``(master_seed, r)``, so any repetition can be re-run alone."""
    return int(np.random.default_rng([int(master_seed), int(repetition)]).integers(0, 100001))


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def _split_list(v) -> tuple:
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return tuple(s.strip() for s in str(v).split(",") if s.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "xor"
    datasets: tuple = ()
    mechanisms: tuple[str, ...] = ("mcar", "mar", "mnar")
    fractions: tuple[float, ...] = (0.5,)
    methods: tuple[str, ...] = ("zero", "mean", "knn", "iterative", "promissing", "m_promissing")
    repetitions: int | None = None
    folds: int = 2
    seed: int = 0
    epochs: int | None = None
    batch_size: int | None = None
    optimizer: str | None = None
    lr: float | None = None
    n: int | None = None
    noise_var: float = 0.25
    # fusion
    sizes: tuple[int, ...] = (6, 4, 5, 3, 8)
    separation: tuple[float, ...] = (1.0, 0.8, 0.5, 0.3, 1.2)
    positive_rate: float = 0.67
    cell_missing_rate: float = 0.1
    modality_missing_rate: float = 0.1
    n_test: int = 50
    imputer: str = "knn:1"
    trajectory_repetitions: int = 20
    head_weight: float = 1.0
    representation: str = "relu"
    out: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise SpecError(f"unknown experiment {self.experiment!r}")
        for key, value in EXPERIMENT_DEFAULTS[self.experiment].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        if self.optimizer not in ("sgd", "adam"):
            raise SpecError(f"unknown optimizer {self.optimizer!r}")
        if self.repetitions < 1:
            raise SpecError("repetitions must be >= 1")
        for m in self.methods:
            if not (is_imputer(m) or m in NETWORK_METHODS):
                raise SpecError(f"unknown method {m!r}")
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise SpecError(f"fraction {f} outside [0, 1]")
        for m in self.mechanisms:
            if m not in ("mcar", "mar", "mnar"):
                raise SpecError(f"unknown mechanism {m!r}")

    def seeds(self) -> list[int]:
        return [repetition_seed(self.seed, r) for r in range(self.repetitions)]

    def with_overrides(self, **kv) -> "ExperimentConfig":
        return replace(self, **coerce(kv))


# unset fields take these per-experiment values
EXPERIMENT_DEFAULTS = {
    "xor": dict(repetitions=10, epochs=100, batch_size=10, optimizer="sgd", lr=0.1, n=1000),
    "benchmark": dict(repetitions=10, epochs=100, batch_size=10, optimizer="sgd", lr=0.01, n=0),
    "fusion": dict(repetitions=1, epochs=20, batch_size=32, optimizer="adam", lr=3e-4, n=300),
    "explain": dict(repetitions=1, epochs=0, batch_size=1, optimizer="sgd", lr=0.0, n=0),
}

_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(kv: dict) -> dict:
    """Convert string values to the field types of :class:`ExperimentConfig`."""
    out = {}
    for key, value in kv.items():
        key = key.replace("-", "_")
        if key == "reps":
            key = "repetitions"
        if key not in _TYPES:
            raise SpecError(f"unknown config key {key!r}")
        if value is None:
            continue
        t = str(_TYPES[key])
        if t.startswith("tuple"):
            items = _split_list(value)
            if "float" in t:
                items = tuple(float(x) for x in items)
            elif "int" in t:
                items = tuple(int(x) for x in items)
            elif key == "mechanisms":
                items = tuple(x.lower() for x in items)
            value = items
        elif t.startswith("int"):
            value = int(value)
        elif t.startswith("float"):
            value = float(value)
        else:
            value = str(value)
        out[key] = value
    return out


def parse_config_text(text: str) -> dict:
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"config line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()
    return kv


def load_config(path, **overrides) -> ExperimentConfig:
    kv = parse_config_text(Path(path).read_text(encoding="utf-8"))
    kv.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**coerce(kv))
