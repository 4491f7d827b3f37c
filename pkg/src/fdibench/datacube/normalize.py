"""Per-channel z-score normalization fitted on training days only."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .cube import CHANNELS, DataCube

STD_FLOOR = 1e-6


@dataclass
class Normalizer:
    mean: np.ndarray  # (14,) float32
    std: np.ndarray  # (14,) float32
    day_range: tuple = (0, 0)

    def apply(self, patch: np.ndarray) -> np.ndarray:
        """Standardize continuous channels; the channel axis is ``-3``."""
        shape = (-1, 1, 1)
        return ((patch - self.mean.reshape(shape)) / self.std.reshape(shape)).astype(np.float32)

    def to_dict(self):
        return {
            "channels": list(CHANNELS),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "day_range": list(self.day_range),
        }

    @classmethod
    def from_dict(cls, d):
        if list(d.get("channels", CHANNELS)) != list(CHANNELS):
            raise DataError("normalizer channel schema does not match")
        return cls(np.array(d["mean"], np.float32), np.array(d["std"], np.float32), tuple(d["day_range"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise DataError(f"normalizer file not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def fit_normalizer(cube: DataCube, day_range) -> Normalizer:
    """Mean/std per channel over days ``[start, stop)``.

    Only frames inside the range are read.  Accumulation is float64 in day
    order, so the result is deterministic.
    """
    start, stop = int(day_range[0]), int(day_range[1])
    if stop <= start:
        raise DataError(f"empty normalizer day range [{start}, {stop})")
    if start < 0 or stop > cube.header.n_days:
        raise DataError(f"normalizer day range [{start}, {stop}) outside the cube")
    n = 0
    s1 = np.zeros(len(CHANNELS))
    for d in range(start, stop):
        f = cube.frame(d).astype(np.float64).reshape(len(CHANNELS), -1)
        s1 += f.sum(axis=1)
        n += f.shape[1]
    mean = s1 / n
    s2 = np.zeros(len(CHANNELS))
    for d in range(start, stop):
        f = cube.frame(d).astype(np.float64).reshape(len(CHANNELS), -1)
        s2 += ((f - mean[:, None]) ** 2).sum(axis=1)
    std = np.maximum(np.sqrt(s2 / n), STD_FLOOR)
    return Normalizer(mean.astype(np.float32), std.astype(np.float32), (start, stop))


def apply_normalizer(normalizer: Normalizer, patch: np.ndarray) -> np.ndarray:
    return normalizer.apply(patch)
