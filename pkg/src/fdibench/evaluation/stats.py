"""Map-based statistics: daily recall, recall quantiles, FDI skewness, ensemble consistency."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import DataError, UsageError
from ..inference import EnsembleMapSet, FdiMap, ensemble_average

log = logging.getLogger(__name__)

QUANTILE_LEVELS = (40, 50, 60, 70, 80, 90)
N_BINS = 20
THRESHOLD = 0.5


@dataclass
class DailyRecallRecord:
    date: int
    fires: int
    detected: int
    recall: float


@dataclass
class QuantileTable:
    levels: tuple
    values: tuple
    n_days: int

    def as_dict(self):
        return dict(zip(self.levels, self.values))


@dataclass
class FdiDistribution:
    date: int
    counts: tuple
    n_valid: int
    skewness: float


@dataclass
class ConsistencyRow:
    date: int
    lhs: float
    rhs: float
    gap: float


@dataclass
class BaselineRow:
    date: int
    model_recall: float | None
    baseline_recall: float | None
    model_false_alarm: float | None
    baseline_false_alarm: float | None


def daily_recall(fdi_map: FdiMap, burn: np.ndarray, threshold: float = THRESHOLD):
    """Share of valid burn pixels with FDI strictly above ``threshold``; None if there are none."""
    burn = np.asarray(burn, dtype=bool)
    if burn.shape != fdi_map.mask.shape:
        raise DataError(f"burn mask {burn.shape} does not match map grid {fdi_map.mask.shape}")
    fire = burn & fdi_map.mask
    n = int(fire.sum())
    if n == 0:
        log.debug("day %d: no valid fire pixels, skipped", fdi_map.date)
        return None
    det = int(np.sum(fdi_map.values[fire] > threshold))
    return DailyRecallRecord(fdi_map.date, n, det, det / n)


def nearest_rank(n: int, level) -> int:
    """1-based rank ceil(level/100 * n), at least 1."""
    q = Fraction(str(level)) * n / 100
    return max(1, -(-q.numerator // q.denominator))


def recall_quantiles(records, levels=QUANTILE_LEVELS) -> QuantileTable:
    """Nearest-rank quantiles of daily recall; accepts records or bare recall values."""
    vals = [r.recall if isinstance(r, DailyRecallRecord) else float(r) for r in records]
    if not vals:
        raise DataError("recall quantiles need at least one fire day")
    for q in levels:
        if not 0 < q <= 100:
            raise UsageError(f"quantile level {q} outside (0, 100]")
    ordered = sorted(vals)
    n = len(ordered)
    return QuantileTable(tuple(levels), tuple(ordered[nearest_rank(n, q) - 1] for q in levels), n)


def skewness(values: np.ndarray) -> float:
    """Fisher-Pearson coefficient m3 / m2^1.5 (biased moments); 0 for constant input."""
    v = np.asarray(values, dtype=np.float64)
    d = v - v.mean()
    m2 = np.mean(d * d)
    if m2 == 0:
        return 0.0
    return float(np.mean(d * d * d) / m2 ** 1.5)


def fdi_distribution(fdi_map: FdiMap, bins: int = N_BINS) -> FdiDistribution:
    v = fdi_map.valid
    if v.size < 3:
        raise DataError(f"day {fdi_map.date}: {v.size} valid pixels, skewness needs at least 3")
    counts, _ = np.histogram(v.astype(np.float64), bins=bins, range=(0.0, 1.0))
    return FdiDistribution(fdi_map.date, tuple(int(c) for c in counts), int(v.size), skewness(v))


def ensemble_consistency(members_by_day, burn_by_day, threshold: float = THRESHOLD) -> list:
    """Mean member recall against recall of the averaged map, per fire day.

    ``members_by_day`` is a list of EnsembleMapSet (or lists of FdiMap);
    ``burn_by_day`` maps date to a burn mask.  Days without valid fires are skipped.
    """
    rows = []
    for ms in members_by_day:
        if not isinstance(ms, EnsembleMapSet):
            ms = EnsembleMapSet(list(ms))
        if len(ms.maps) < 2:
            raise DataError("ensemble consistency needs at least 2 members")
        date = ms.maps[0].date
        if date not in burn_by_day:
            raise DataError(f"no burn mask for day {date}")
        recs = [daily_recall(m, burn_by_day[date], threshold) for m in ms.maps]
        if recs[0] is None:
            continue
        lhs = float(np.mean([r.recall for r in recs]))
        rhs = daily_recall(ensemble_average(ms), burn_by_day[date], threshold).recall
        rows.append(ConsistencyRow(date, lhs, rhs, abs(lhs - rhs)))
    return rows


def rescale(fdi_map: FdiMap, lo: float, hi: float) -> FdiMap:
    """Linear min-max rescale to [0, 1] on valid pixels."""
    if not hi > lo:
        raise DataError(f"baseline range [{lo}, {hi}] is empty")
    v = (fdi_map.values.astype(np.float64) - lo) / (hi - lo)
    v = np.where(fdi_map.mask, np.clip(v, 0.0, 1.0), 0.0)
    return FdiMap(v.astype(np.float32), fdi_map.mask, fdi_map.date, fdi_map.model_id)


def false_alarm_fraction(fdi_map: FdiMap, burn: np.ndarray, threshold: float):
    """Valid non-fire pixels above threshold over valid non-fire pixels; None if there are none."""
    quiet = fdi_map.mask & ~np.asarray(burn, dtype=bool)
    n = int(quiet.sum())
    if n == 0:
        return None
    return int(np.sum(fdi_map.values[quiet] > threshold)) / n


def compare_baseline(model_map: FdiMap, baseline_map: FdiMap, burn: np.ndarray,
                     thresholds=(THRESHOLD, THRESHOLD)) -> BaselineRow:
    """Recall and false-alarm area of the model map against an already rescaled baseline."""
    if model_map.mask.shape != baseline_map.mask.shape or np.shape(burn) != model_map.mask.shape:
        raise DataError(f"grid mismatch: model {model_map.mask.shape}, baseline {baseline_map.mask.shape}, "
                        f"burn {np.shape(burn)}")
    common = model_map.mask & baseline_map.mask
    m = FdiMap(model_map.values, common, model_map.date)
    b = FdiMap(baseline_map.values, common, model_map.date)
    rm, rb = daily_recall(m, burn, thresholds[0]), daily_recall(b, burn, thresholds[1])
    return BaselineRow(model_map.date,
                       None if rm is None else rm.recall,
                       None if rb is None else rb.recall,
                       false_alarm_fraction(m, burn, thresholds[0]),
                       false_alarm_fraction(b, burn, thresholds[1]))


def fire_days(burn: np.ndarray, susceptible: np.ndarray, days) -> list:
    """Days (from ``days``) with at least one burn pixel on a susceptible location."""
    return [int(d) for d in days if np.any(burn[d] & susceptible)]


def select_no_fire_days(burn: np.ndarray, days, n: int = 6, seed: int = 0) -> list:
    """``n`` days with zero region-wide burn pixels, drawn under ``seed``; sorted."""
    pool = [int(d) for d in days if not burn[d].any()]
    if len(pool) < n:
        raise DataError(f"only {len(pool)} no-fire days available, {n} requested")
    rng = np.random.default_rng(seed)
    return sorted(int(d) for d in rng.choice(pool, size=n, replace=False))
