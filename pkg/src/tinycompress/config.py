"""JSON run configuration shared by the grid runner and the command line.

Every section is optional; omitted keys take the defaults below and unknown keys
are rejected with the offending dotted path in the message.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .compress import ClusterConfig, CompressionConfig, PruneConfig, QuantConfig, normalize_pipeline
from .compress.pipeline import PIPELINES
from .data import FAULT_CATALOG, EXCLUDED_FAULTS, INCLUDED_FAULTS
from .nn import DEFAULT_ARCH, TrainConfig

SEED_ENV = "TINYCOMPRESS_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "synth"  # "synth" or "csv"
    path: Optional[str] = None
    samples_per_fault: int = 1000
    faults: list = field(default_factory=lambda: list(INCLUDED_FAULTS))
    negatives: str = "normal"
    test_fraction: float = 0.25


@dataclass
class TrainSection:
    learning_rate: float = 0.01
    batch_size: int = 64
    epochs: int = 30
    l2_penalty: float = 1e-4


@dataclass
class PruneSection:
    threshold: Optional[float] = None
    target_sparsity: Optional[float] = 0.77


@dataclass
class ClusterSection:
    clusters_per_layer: int = 128
    max_iters: int = 100
    finetune_epochs: int = 15
    finetune_lr: float = 0.005


@dataclass
class QuantSection:
    bits: int = 8


@dataclass
class RunConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    arch: list = field(default_factory=lambda: list(DEFAULT_ARCH))
    train: TrainSection = field(default_factory=TrainSection)
    prune: PruneSection = field(default_factory=PruneSection)
    cluster: ClusterSection = field(default_factory=ClusterSection)
    quant: QuantSection = field(default_factory=QuantSection)
    pipelines: list = field(default_factory=lambda: list(PIPELINES))
    output_dir: str = "runs/latest"
    cache_dir: Optional[str] = None
    workers: int = 1

    # -- derived objects -------------------------------------------------------------

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **asdict(self.train))

    def compression_config(self, seed: int = 0) -> CompressionConfig:
        p = self.prune
        if p.threshold is not None:
            prune = PruneConfig(threshold=p.threshold)
        else:
            prune = PruneConfig(target_sparsity=p.target_sparsity)
        return CompressionConfig(
            prune=prune,
            cluster=ClusterConfig(seed=seed, **asdict(self.cluster)),
            quant=QuantConfig(**asdict(self.quant)),
            finetune_batch_size=self.train.batch_size,
            finetune_l2_penalty=self.train.l2_penalty,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self, *sections: str) -> str:
        """Short hash of the named sections (all of them if none given)."""
        d = self.to_dict()
        if sections:
            d = {k: d[k] for k in sections}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        d = self.data
        if d.source not in ("synth", "csv"):
            raise ConfigError("data.source must be 'synth' or 'csv'")
        if d.source == "csv" and not d.path:
            raise ConfigError("data.path is required when data.source is 'csv'")
        if d.samples_per_fault < 1:
            raise ConfigError("data.samples_per_fault must be at least 1")
        bad = [f for f in d.faults if f not in FAULT_CATALOG or f in EXCLUDED_FAULTS]
        if bad or not d.faults:
            raise ConfigError(f"data.faults must be a nonempty subset of {list(INCLUDED_FAULTS)}")
        if d.negatives not in ("normal", "rest"):
            raise ConfigError("data.negatives must be 'normal' or 'rest'")
        if not 0 < d.test_fraction < 1:
            raise ConfigError("data.test_fraction must lie in (0, 1)")
        if len(self.arch) < 2 or any(int(a) < 1 for a in self.arch):
            raise ConfigError("arch needs at least two positive sizes")
        if self.arch[0] != 52 or self.arch[-1] != 2:
            raise ConfigError("arch must start at 52 inputs and end at 2 classes")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        try:
            self.pipelines = [normalize_pipeline(p) for p in self.pipelines]
            self.train_config(0)
            self.compression_config()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not self.pipelines:
            raise ConfigError("pipelines must not be empty")
        return self


def _build(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key {'.'.join(filter(None, [where, unknown[0]]))!r}")
    kwargs = {}
    for name, value in raw.items():
        sub = _SECTIONS.get((cls, name))
        path = ".".join(filter(None, [where, name]))
        if sub is not None:
            kwargs[name] = _build(sub, value, path)
        else:
            kwargs[name] = _check_type(cls, name, value, path)
    return cls(**kwargs)


def _check_type(cls, name, value, path):
    default = getattr(cls(), name)
    if value is None:
        if default is not None and name not in ("threshold", "target_sparsity", "path", "cache_dir"):
            raise ConfigError(f"{path} may not be null")
        return None
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{path}: booleans are not accepted here")
    if isinstance(default, int) and not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer")
    if isinstance(default, float) and not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number")
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{path} must be a string")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{path} must be a list")
    if default is None and not isinstance(value, (int, float, str)):
        raise ConfigError(f"{path} has the wrong type")
    return float(value) if isinstance(default, float) else value


_SECTIONS = {
    (RunConfig, "data"): DataConfig,
    (RunConfig, "train"): TrainSection,
    (RunConfig, "prune"): PruneSection,
    (RunConfig, "cluster"): ClusterSection,
    (RunConfig, "quant"): QuantSection,
}


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    prune = raw.get("prune")
    # giving a threshold switches pruning to threshold mode unless a sparsity is also given
    if isinstance(prune, dict) and prune.get("threshold") is not None and "target_sparsity" not in prune:
        raw["prune"] = {**prune, "target_sparsity": None}
    if "seed" not in raw and os.environ.get(SEED_ENV):
        try:
            raw["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    return _build(RunConfig, raw, "").validate()


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return config_from_dict(raw)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 32-bit child seed for ``(seed, *keys)``."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])
