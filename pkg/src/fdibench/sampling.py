"""Labeled patch dataset construction.

Labels follow the fire=0 / no-fire=1 convention.  Samples are kept as a
structured array with fields ``year, date, x, y, label``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datacube import SUSCEPTIBLE_CLASSES, DataCube, Normalizer, extract_patch
from .errors import DataError, SamplingError, UsageError

log = logging.getLogger(__name__)

FIRE, NOFIRE = 0, 1
SAMPLE_DTYPE = np.dtype([("year", "<i4"), ("date", "<i4"), ("x", "<i4"), ("y", "<i4"), ("label", "i1")])
MANIFEST_COLUMNS = ("year", "date_index", "x", "y", "label")


@dataclass
class SamplingConfig:
    ratio: int = 2
    patch_size: int = 25
    # per-class minimum share of all fires; None selects by cumulative coverage
    clc_threshold: float | None = None
    clc_coverage: float = 0.95
    fire_classes: tuple | None = None
    susceptible_classes: tuple = SUSCEPTIBLE_CLASSES
    seed: int = 0

    def __post_init__(self):
        if self.ratio < 1:
            raise UsageError(f"negative:positive ratio must be >= 1, got {self.ratio}")
        if self.clc_threshold is not None and not 0 <= self.clc_threshold < 1:
            raise UsageError(f"CLC threshold must be in [0, 1), got {self.clc_threshold}")
        if not 0 < self.clc_coverage <= 1:
            raise UsageError(f"CLC coverage must be in (0, 1], got {self.clc_coverage}")
        self.susceptible_classes = tuple(self.susceptible_classes)
        if self.fire_classes is not None:
            self.fire_classes = tuple(self.fire_classes)

    @property
    def margin(self):
        return self.patch_size // 2


def make_samples(year, date, x, y, label) -> np.ndarray:
    year = np.atleast_1d(year)
    out = np.empty(len(year), SAMPLE_DTYPE)
    out["year"], out["date"], out["x"], out["y"], out["label"] = year, date, x, y, label
    return out


def interior_mask(cube: DataCube, margin: int) -> np.ndarray:
    h, w = cube.header.height, cube.header.width
    m = np.zeros((h, w), bool)
    m[margin:h - margin, margin:w - margin] = True
    return m


# ---------------------------------------------------------------- fire samples

def fire_clc_histogram(cube: DataCube) -> np.ndarray:
    """Number of burn-mask pixels per land-cover class (all days)."""
    per_pixel = cube.burn.sum(axis=0)
    return np.bincount(cube.clc.ravel(), weights=per_pixel.ravel(),
                       minlength=cube.header.n_clc_classes).astype(np.int64)


def admitted_fire_classes(hist: np.ndarray, config: SamplingConfig) -> tuple:
    if config.fire_classes is not None:
        return tuple(sorted(config.fire_classes))
    total = hist.sum()
    if total == 0:
        return ()
    if config.clc_threshold is not None:
        return tuple(int(c) for c in np.nonzero(hist / total >= config.clc_threshold)[0] if hist[c] > 0)
    order = np.argsort(-hist, kind="stable")
    admitted, covered = [], 0
    for c in order:
        if covered >= config.clc_coverage * total or hist[c] == 0:
            break
        admitted.append(int(c))
        covered += hist[c]
    return tuple(sorted(admitted))


def select_fire_samples(cube: DataCube, config: SamplingConfig, hist=None) -> np.ndarray:
    """One sample per (year, x, y) burn location in an admitted class, away from the border."""
    if hist is None:
        hist = fire_clc_histogram(cube)
    admitted = admitted_fire_classes(hist, config)
    ok = np.isin(cube.clc, admitted) & interior_mask(cube, config.margin)
    t, yy, xx = np.nonzero(cube.burn & ok[None])
    years = np.asarray(cube.year_of(t)) if len(t) else t
    # np.nonzero is ordered by (date, y, x); keep the earliest fire per location-year
    key = np.stack([years, yy, xx], axis=1)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    if len(first) == 0:
        raise SamplingError("no fire samples survive the land-cover and border filters")
    return make_samples(years[first], t[first], xx[first], yy[first], FIRE)


# ---------------------------------------------------------------- no-fire samples

def nofire_candidates(cube: DataCube, year: int, config: SamplingConfig):
    """Candidate dates and pixel mask for one year's negatives (rules 2-5)."""
    days = cube.days_of_year(year)
    daily = cube.burn[days].sum(axis=(1, 2))
    fire_days = days[daily > 0]
    if len(fire_days) == 0:
        return np.array([], int), np.zeros(cube.clc.shape, bool)
    season = (days >= fire_days.min()) & (days <= fire_days.max())
    dates = days[season & (daily == 0)]
    burned_this_year = cube.burn[days].any(axis=0)
    pixels = (np.isin(cube.clc, config.susceptible_classes)
              & interior_mask(cube, config.margin)
              & ~burned_this_year)
    return dates, pixels


def select_nofire_samples(cube: DataCube, fire: np.ndarray, config: SamplingConfig,
                          seed: int | None = None) -> np.ndarray:
    seed = config.seed if seed is None else seed
    out = []
    for year in sorted(set(fire["year"].tolist())):
        n_fire = int((fire["year"] == year).sum())
        need = config.ratio * n_fire
        dates, pixels = nofire_candidates(cube, year, config)
        # fire-sample locations are also excluded explicitly
        fy = fire[fire["year"] == year]
        pixels = pixels.copy()
        pixels[fy["y"], fy["x"]] = False
        pool_y, pool_x = np.nonzero(pixels)
        pool = len(pool_y) if len(dates) else 0
        if pool < need:
            raise SamplingError(
                f"year {year}: need {need} no-fire samples but the candidate pool has {pool} "
                f"locations ({len(dates)} fire-free in-season dates)"
            )
        rng = np.random.default_rng([seed, year])
        pick = rng.choice(len(pool_y), size=need, replace=False)
        pick_dates = dates[rng.integers(0, len(dates), size=need)]
        out.append(make_samples(np.full(need, year), pick_dates, pool_x[pick], pool_y[pick], NOFIRE))
    if not out:
        return np.empty(0, SAMPLE_DTYPE)
    res = np.concatenate(out)
    return res[np.lexsort((res["x"], res["y"], res["date"], res["year"]))]


def build_samples(cube: DataCube, config: SamplingConfig) -> np.ndarray:
    fire = select_fire_samples(cube, config)
    nofire = select_nofire_samples(cube, fire, config)
    return np.concatenate([fire, nofire])


# ---------------------------------------------------------------- audit

def audit_sampling_rules(cube: DataCube, samples: np.ndarray, config: SamplingConfig) -> list[str]:
    """Brute-force check of the six negative-sampling rules plus border/label sanity.

    Deliberately written as plain loops, independent of the selection code.
    Returns a list of human-readable violations (empty when all rules hold).
    """
    violations = []
    h, w = cube.header.height, cube.header.width
    m = config.margin
    burn = cube.burn
    n_days = cube.header.n_days
    fires_per_day = [int(burn[d].sum()) for d in range(n_days)]
    susceptible = set(config.susceptible_classes)
    by_year = {}
    for s in samples.tolist():
        year, date, x, y, label = s
        by_year.setdefault(year, {FIRE: [], NOFIRE: []})[label].append((date, x, y))
        if not (m <= x < w - m and m <= y < h - m):
            violations.append(f"border: sample {s} closer than {m} px to the edge")
        if cube.year_of(date) != year:
            violations.append(f"year: sample {s} date belongs to year {cube.year_of(date)}")
    for year, groups in sorted(by_year.items()):
        pos, neg = groups[FIRE], groups[NOFIRE]
        # rule 1
        if len(neg) != config.ratio * len(pos):
            violations.append(f"rule1: year {year} has {len(neg)} no-fire vs {len(pos)} fire samples")
        year_fire_days = [d for d in range(n_days) if cube.year_of(d) == year and fires_per_day[d] > 0]
        first = min(year_fire_days) if year_fire_days else None
        last = max(year_fire_days) if year_fire_days else None
        pos_locs = set((x, y) for _, x, y in pos)
        burned = set()
        for d in year_fire_days:
            for yy, xx in zip(*np.nonzero(burn[d])):
                burned.add((int(xx), int(yy)))
        seen = set()
        for date, x, y in neg:
            # rule 2
            if first is None or not first <= date <= last:
                violations.append(f"rule2: year {year} no-fire date {date} outside fire season [{first}, {last}]")
            # rule 3
            if fires_per_day[date] != 0:
                violations.append(f"rule3: year {year} no-fire date {date} has {fires_per_day[date]} fires")
            # rule 4
            if int(cube.clc[y, x]) not in susceptible:
                violations.append(f"rule4: year {year} no-fire at ({x},{y}) on class {int(cube.clc[y, x])}")
            # rule 5
            if (x, y) in pos_locs or (x, y) in burned:
                violations.append(f"rule5: year {year} no-fire at ({x},{y}) shares a fire location")
            # rule 6
            if (x, y) in seen:
                violations.append(f"rule6: year {year} duplicate no-fire location ({x},{y})")
            seen.add((x, y))
        pos_seen = set()
        for date, x, y in pos:
            if not burn[date, y, x]:
                violations.append(f"label: fire sample ({date},{x},{y}) is not burned")
            if (x, y) in pos_seen:
                violations.append(f"unique: year {year} duplicate fire location ({x},{y})")
            pos_seen.add((x, y))
    return violations


# ---------------------------------------------------------------- split

@dataclass
class DatasetSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    years: dict = field(default_factory=dict)


def chronological_split(samples: np.ndarray, train_years, val_years, test_years) -> DatasetSplit:
    sets = {"train": set(train_years), "val": set(val_years), "test": set(test_years)}
    for name in ("train", "val"):
        if not sets[name]:
            raise UsageError(f"{name} year set is empty")
    names = list(sets)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if sets[a] & sets[b]:
                raise UsageError(f"{a} and {b} year sets overlap: {sorted(sets[a] & sets[b])}")
    covered = set().union(*sets.values())
    missing = set(samples["year"].tolist()) - covered
    if missing:
        raise UsageError(f"sample years {sorted(missing)} are not assigned to any split")
    parts = {k: samples[np.isin(samples["year"], sorted(v))] for k, v in sets.items()}
    return DatasetSplit(parts["train"], parts["val"], parts["test"],
                        {k: sorted(v) for k, v in sets.items()})


# ---------------------------------------------------------------- materialization

@dataclass
class PatchDataset:
    x: np.ndarray  # (N, [T,] 14, s, s) float32, standardized
    clc: np.ndarray  # (N, [T,] s, s) uint8
    labels: np.ndarray  # (N,) int8
    index: np.ndarray  # structured sample records

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        return PatchDataset(self.x[idx], self.clc[idx], self.labels[idx], self.index[idx])


def assemble_dataset(cube: DataCube, samples: np.ndarray, normalizer: Normalizer,
                     temporal_len: int = 1, patch_size: int = 25) -> PatchDataset:
    """Extract, standardize and stack patches for ``samples``.

    Samples lacking ``temporal_len - 1`` preceding days are dropped (logged).
    """
    keep = samples["date"] >= temporal_len - 1
    dropped = int((~keep).sum())
    if dropped:
        log.info("dropped %d samples without %d days of history", dropped, temporal_len - 1)
    samples = samples[keep]
    n = len(samples)
    tshape = () if temporal_len == 1 else (temporal_len,)
    x = np.empty((n,) + tshape + (14, patch_size, patch_size), np.float32)
    clc = np.empty((n,) + tshape + (patch_size, patch_size), np.uint8)
    for i, s in enumerate(samples):
        cont, cl = extract_patch(cube, int(s["date"]), int(s["x"]), int(s["y"]), patch_size,
                                 temporal_len, mirror=False)
        x[i] = normalizer.apply(cont)
        clc[i] = cl
    return PatchDataset(x, clc, samples["label"].astype(np.int8), samples)


# ---------------------------------------------------------------- manifest

def write_manifest(samples: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(MANIFEST_COLUMNS)
        for s in samples.tolist():
            wr.writerow(s)


def read_manifest(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"sample manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if tuple(header or ()) != MANIFEST_COLUMNS:
            raise DataError(f"{path}: expected columns {','.join(MANIFEST_COLUMNS)}, got {header}")
        rows = [tuple(int(v) for v in r) for r in rd if r]
    return np.array(rows, dtype=SAMPLE_DTYPE) if rows else np.empty(0, SAMPLE_DTYPE)
