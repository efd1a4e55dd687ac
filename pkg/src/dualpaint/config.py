"""Flat key-value run configuration with dotted-path overrides.

File format: one `section.key = value` per line, `#` comments. Sections map
onto the data/model/train/loss dataclasses; unknown keys are rejected and
CLI overrides win over file values.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .generator import GeneratorConfig
from .losses import LossWeights


@dataclass
class DataConfig:
    source: str = "synthetic"  # "synthetic" or a path to a newline-delimited manifest
    masks_dir: str = ""        # mask PNGs for manifest datasets; blank = synthetic masks
    n_samples: int = 64
    size: int = 64
    seed: int = 0
    holdout: int = 16          # samples reserved for evaluation

    def validate(self) -> None:
        if self.n_samples <= 0:
            raise ConfigError(f"data.n_samples must be positive, got {self.n_samples}")
        if not (0 <= self.holdout < self.n_samples):
            raise ConfigError("data.holdout must lie in [0, n_samples)")


PHASES = ("initial", "finetune")


@dataclass
class TrainConfig:
    batch_size: int = 6
    lr_initial: float = 2e-4
    lr_finetune: float = 5e-5
    d_lr_ratio: float = 0.1
    beta1: float = 0.5
    beta2: float = 0.999
    phase: str = "initial"
    max_iters: int = 500
    finetune_iters: int = 100
    seed: int = 0
    log_every: int = 1
    checkpoint_every: int = 0  # 0 = checkpoint only at the end

    def validate(self) -> None:
        if self.phase not in PHASES:
            raise ConfigError(f"train.phase must be one of {PHASES}, got {self.phase!r}")
        if not (0 < self.lr_finetune < self.lr_initial):
            raise ConfigError("need 0 < lr_finetune < lr_initial")
        if self.batch_size <= 0 or self.max_iters < 0:
            raise ConfigError("batch_size must be positive and max_iters >= 0")

    @property
    def generator_lr(self) -> float:
        return self.lr_initial if self.phase == "initial" else self.lr_finetune

    @property
    def discriminator_lr(self) -> float:
        return self.generator_lr * self.d_lr_ratio


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: GeneratorConfig = field(default_factory=lambda: GeneratorConfig.for_size(64))
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)

    def validate(self) -> None:
        self.data.validate()
        self.model.validate()
        self.train.validate()
        self.loss.validate()
        if self.data.source == "synthetic":
            self.model.check_resolution(self.data.size, self.data.size)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"data": DataConfig, "model": GeneratorConfig, "train": TrainConfig, "loss": LossWeights}


def _parse_value(raw: str, target_type: type, key: str):
    raw = raw.strip()
    try:
        if target_type is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}") from e


def apply_override(cfg: RunConfig, dotted_key: str, raw_value: str) -> None:
    parts = dotted_key.split(".")
    if len(parts) != 2 or parts[0] not in _SECTIONS:
        raise ConfigError(f"unknown config key {dotted_key!r} (use section.key)")
    section_name, key = parts
    section = getattr(cfg, section_name)
    if key not in {f.name for f in fields(section)}:
        raise ConfigError(f"unknown config key {dotted_key!r}")
    # Field types are inferred from the default values; every field has one.
    setattr(section, key, _parse_value(raw_value, type(getattr(section, key)), dotted_key))


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        apply_override(cfg, key.strip(), value)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = stripped.split("=", 1)
        apply_override(cfg, key.strip(), value)
    return cfg


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """RunConfig from an optional file plus CLI overrides (overrides win)."""
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        cfg = parse_config_text(text, cfg)
    if overrides:
        apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg
