"""
config.py
---------
Experiment configuration: dataset source, incompleteness protocol, split,
training and architecture settings, repeats and output location.

Loaded from an optional JSON file and then overridden by CLI flags. Every
key is optional except the dataset source (``data_dir`` or ``synthetic``).
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .dataset import IncompletenessSpec, SplitSpec, SyntheticSpec
from .errors import ConfigError, ContractError
from .model import ModelSpec
from .trainer import TrainConfig


def _build(cls, data: Optional[Mapping], section: str):
    if data is None:
        return cls()
    if not isinstance(data, Mapping):
        raise ConfigError(f"'{section}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {', '.join(unknown)}")
    return cls(**dict(data))


@dataclass
class ExperimentConfig:
    data_dir: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    incompleteness: IncompletenessSpec = field(default_factory=IncompletenessSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    repeats: int = 1
    base_seed: int = 0
    output_dir: str = "runs"
    workers: int = 1

    def validate(self, need_source: bool = True) -> "ExperimentConfig":
        if need_source and self.data_dir is None and self.synthetic is None:
            raise ConfigError("a dataset source is required: set data_dir or synthetic")
        if self.data_dir is not None and self.synthetic is not None:
            raise ConfigError("data_dir and synthetic are both set; keep one source")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        self.train.validate()
        try:
            self.incompleteness.validate()
            self.split.validate()
            self.model.validate()
            if self.synthetic is not None:
                self.synthetic.validate()
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def seeds(self):
        return [self.base_seed + r for r in range(self.repeats)]

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Apply flag values (``None`` means "not given"); keys are section-qualified, e.g. ``train.alpha``."""
        cfg = replace(self, incompleteness=replace(self.incompleteness), split=replace(self.split),
                      train=replace(self.train), model=replace(self.model))
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.rpartition(".")
            target = getattr(cfg, section) if section else cfg
            if target is None or not hasattr(target, name):
                raise ConfigError(f"unknown configuration key '{key}'")
            setattr(target, name, value)
        return cfg

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
        synthetic = data.get("synthetic")
        try:
            return cls(
                data_dir=data.get("data_dir"),
                synthetic=None if synthetic is None else _build(SyntheticSpec, synthetic, "synthetic"),
                incompleteness=_build(IncompletenessSpec, data.get("incompleteness"), "incompleteness"),
                split=_build(SplitSpec, data.get("split"), "split"),
                train=_build(TrainConfig, data.get("train"), "train"),
                model=_build(ModelSpec, data.get("model"), "model"),
                repeats=int(data.get("repeats", 1)),
                base_seed=int(data.get("base_seed", 0)),
                output_dir=str(data.get("output_dir", "runs")),
                workers=int(data.get("workers", 1)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration value ({exc})") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: the configuration must be a JSON object")
    return ExperimentConfig.from_dict(data)
