"""In-memory datacube model."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

CHANNELS = (
    "ndvi",
    "lst_day",
    "lst_night",
    "dewpoint_max",
    "t2m_max",
    "sp_max",
    "tp_max",
    "wind_max",
    "rh_min",
    "dem",
    "slope",
    "dist_roads",
    "dist_waterway",
    "population",
)
STATIC_CHANNELS = ("dem", "slope", "dist_roads", "dist_waterway", "population")
FORMAT_VERSION = 1


@dataclass
class CubeHeader:
    height: int
    width: int
    n_days: int
    start_date: str
    channels: tuple = CHANNELS
    n_clc_classes: int = 15
    format_version: int = FORMAT_VERSION
    generator_seed: int | None = None
    # synthetic cubes use fixed-length years; None means calendar years
    days_per_year: int | None = None

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if self.channels != CHANNELS:
            raise DataError(f"channel schema mismatch: expected {list(CHANNELS)}, got {list(self.channels)}")
        if self.n_days < 1:
            raise DataError(f"day count must be >= 1, got {self.n_days}")
        dt.date.fromisoformat(self.start_date)

    def to_dict(self):
        return {
            "height": self.height,
            "width": self.width,
            "n_days": self.n_days,
            "start_date": self.start_date,
            "channels": list(self.channels),
            "n_clc_classes": self.n_clc_classes,
            "format_version": self.format_version,
            "generator_seed": self.generator_seed,
            "days_per_year": self.days_per_year,
        }


@dataclass(eq=False)
class DataCube:
    """T x H x W raster stack.

    ``channels`` is (T, 14, H, W) float32; ``clc`` (H, W) integer classes;
    ``susceptible`` (H, W) bool; ``burn`` (T, H, W) bool.  Pixel coordinates
    are ``(x, y)`` = (column, row).
    """

    header: CubeHeader
    channels: np.ndarray
    clc: np.ndarray
    susceptible: np.ndarray
    burn: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h, w, t = self.header.height, self.header.width, self.header.n_days
        expect = {
            "channels": (t, len(CHANNELS), h, w),
            "clc": (h, w),
            "susceptible": (h, w),
            "burn": (t, h, w),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise DataError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.clc.size and int(self.clc.max()) >= self.header.n_clc_classes:
            raise DataError("land-cover class index exceeds the declared class count")
        if np.any(self.burn & ~self.susceptible[None]):
            raise DataError("burn mask marks fires outside the susceptibility mask")

    @property
    def shape(self):
        return self.header.n_days, self.header.height, self.header.width

    def frame(self, day: int) -> np.ndarray:
        """All continuous channels of one day, (14, H, W)."""
        return self.channels[day]

    def year_index(self, day) -> np.ndarray | int:
        """Zero-based year of a day index (or array of indices)."""
        dpy = self.header.days_per_year
        if dpy:
            return np.asarray(day) // dpy if np.ndim(day) else int(day) // dpy
        start = dt.date.fromisoformat(self.header.start_date)
        days = np.atleast_1d(day)
        years = np.array([(start + dt.timedelta(days=int(d))).year - start.year for d in days])
        return years if np.ndim(day) else int(years[0])

    def year_of(self, day) -> np.ndarray | int:
        """Calendar-style year label, e.g. 2009 for the first year."""
        base = dt.date.fromisoformat(self.header.start_date).year
        return self.year_index(day) + base

    def days_of_year(self, year: int) -> np.ndarray:
        days = np.arange(self.header.n_days)
        return days[self.year_of(days) == year]

    def years(self) -> list[int]:
        return sorted(set(np.atleast_1d(self.year_of(np.arange(self.header.n_days))).tolist()))

    def day_of_year(self, day: int) -> int:
        yr = self.year_of(day)
        return int(day - self.days_of_year(yr)[0])

    def equals(self, other: "DataCube") -> bool:
        return (
            self.header.to_dict() == other.header.to_dict()
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.clc, other.clc)
            and np.array_equal(self.susceptible, other.susceptible)
            and np.array_equal(self.burn, other.burn)
        )
