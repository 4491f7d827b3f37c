"""Run configuration: a TOML file with one table per pipeline stage.

Every key is optional; omitted keys take the dataclass defaults.  Unknown
sections or keys are rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .datacube import SyntheticConfig
from .errors import UsageError
from .models import ModelConfig, default_config
from .sampling import SamplingConfig
from .trainer import EnsembleSpec, TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class SplitConfig:
    # empty lists: all but the last two years train, then one validation and one test year
    train_years: list = field(default_factory=list)
    val_years: list = field(default_factory=list)
    test_years: list = field(default_factory=list)

    def resolve(self, years: list) -> "SplitConfig":
        if self.train_years or self.val_years or self.test_years:
            return self
        if len(years) < 3:
            raise UsageError(f"need at least 3 years for a default chronological split, cube has {years}")
        return SplitConfig(list(years[:-2]), [years[-2]], [years[-1]])


@dataclass
class EvalConfig:
    year: int | None = None  # default: last test year
    season: list = field(default_factory=list)  # day-of-year [start, stop); default: the fire window
    month: list = field(default_factory=list)  # day-of-year [start, stop) for ensemble consistency
    no_fire_days: int = 6
    no_fire_seed: int = 0
    levels: list = field(default_factory=lambda: [40, 50, 60, 70, 80, 90])
    bins: int = 20
    threshold: float = 0.5
    baseline_threshold: float = 0.3  # rescaled weather index; ~88% of fires lie above it
    batch: int = 256


SECTIONS = {
    "synthetic": SyntheticConfig,
    "sampling": SamplingConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "ensemble": EnsembleSpec,
    "split": SplitConfig,
    "evaluation": EvalConfig,
}


@dataclass
class RunConfig:
    synthetic: SyntheticConfig
    sampling: SamplingConfig
    model: ModelConfig
    train: TrainConfig
    ensemble: EnsembleSpec
    split: SplitConfig
    evaluation: EvalConfig

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            d = asdict(getattr(self, name))
            out[name] = json.loads(json.dumps(d, default=list))
        return out

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _check_keys(section: str, values: dict):
    known = {f.name for f in fields(SECTIONS[section])}
    for key in values:
        if key not in known:
            raise UsageError(f"unknown config key {section}.{key}; valid keys: {sorted(known)}")


def parse_override(text: str):
    """``section.key=value`` with a TOML-syntax value; bare words are taken as strings."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise UsageError(f"override {text!r} is not of the form section.key=value")
    path, value = text.split("=", 1)
    section, key = path.strip().split(".", 1)
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    return section, key, parsed


def build_config(raw: dict) -> RunConfig:
    for section, values in raw.items():
        if section not in SECTIONS:
            raise UsageError(f"unknown config section [{section}]; valid sections: {list(SECTIONS)}")
        if not isinstance(values, dict):
            raise UsageError(f"config entry {section} must be a table")
        _check_keys(section, values)
    get = lambda s: dict(raw.get(s, {}))  # noqa: E731
    try:
        model_raw = get("model")
        model = default_config(model_raw.pop("arch", "BasicCNN"), **model_raw)
        sampling_raw = get("sampling")
        sampling_raw.setdefault("patch_size", model.patch_size)
        sampling = SamplingConfig(**sampling_raw)
        cfg = RunConfig(
            synthetic=SyntheticConfig(**get("synthetic")),
            sampling=sampling,
            model=model,
            train=TrainConfig(**get("train")),
            ensemble=EnsembleSpec(**get("ensemble")),
            split=SplitConfig(**get("split")),
            evaluation=EvalConfig(**get("evaluation")),
        )
    except TypeError as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    if cfg.sampling.patch_size != cfg.model.patch_size:
        raise UsageError(f"sampling.patch_size {cfg.sampling.patch_size} != model.patch_size {cfg.model.patch_size}")
    return cfg


def load_config(path=None, overrides=()) -> RunConfig:
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from exc
    for text in overrides:
        section, key, value = parse_override(text)
        if section not in SECTIONS:
            raise UsageError(f"override {text!r}: unknown section {section!r}")
        raw.setdefault(section, {})[key] = value
    return build_config(raw)


def describe_keys() -> str:
    """Every config key with its default, for ``--help``."""
    lines = []
    for name, cls in SECTIONS.items():
        lines.append(f"[{name}]")
        inst = default_config("BasicCNN") if cls is ModelConfig else cls()
        for f in fields(cls):
            lines.append(f"  {f.name} = {getattr(inst, f.name)!r}")
        if cls is ModelConfig:
            lines.append("  (classifier_widths and temporal_len default per arch: DeeperCNN1 (64, 32), "
                         "DeeperCNN2 (64, 16), ConvLSTM (32, 32) with temporal_len 10)")
    return "\n".join(lines)
