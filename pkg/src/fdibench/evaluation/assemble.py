"""Build an EvalReport from per-day maps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..inference import EnsembleMapSet, ensemble_average
from .report import EvalReport
from .stats import (
    N_BINS,
    QUANTILE_LEVELS,
    THRESHOLD,
    compare_baseline,
    daily_recall,
    ensemble_consistency,
    fdi_distribution,
    recall_quantiles,
)


def assemble_report(burn: np.ndarray, season_days, month_days, no_fire_days, members: dict,
                    baseline: dict | None = None, levels=QUANTILE_LEVELS, bins: int = N_BINS,
                    threshold: float = THRESHOLD, baseline_threshold: float = THRESHOLD,
                    threads: int = 1, meta: dict | None = None) -> EvalReport:
    """Evaluate the member-averaged map (a single member is its own average).

    ``members`` maps date -> list of member FdiMaps (identical order each day);
    ``baseline`` maps date -> rescaled baseline FdiMap.
    """
    days = sorted(set(season_days) | set(month_days) | set(no_fire_days))
    sets = {d: EnsembleMapSet(list(members[d])) for d in days}
    ids = sets[days[0]].member_ids if days else []

    def per_day(d):
        ms = sets[d]
        avg = ensemble_average(ms) if len(ms.maps) > 1 else ms.maps[0]
        return d, avg, [daily_recall(m, burn[d], threshold) for m in ms.maps]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = {d: (avg, recs) for d, avg, recs in ex.map(per_day, days)}

    rep = EvalReport(member_ids=list(ids), meta=dict(meta or {}))
    for d in sorted(season_days):
        rec = daily_recall(results[d][0], burn[d], threshold)
        if rec is not None:
            rep.records.append(rec)
            rep.member_recall.append([d] + [None if r is None else r.recall for r in results[d][1]])
    if rep.records:
        rep.quantiles = recall_quantiles(rep.records, levels)
        for m in range(len(ids)):
            recs = [row[m + 1] for row in rep.member_recall if row[m + 1] is not None]
            rep.member_quantiles.append(recall_quantiles(recs, levels) if recs else None)
    for d in sorted(no_fire_days):
        rep.distributions.append(fdi_distribution(results[d][0], bins))
        if len(ids) > 1:
            rep.member_skewness.append([d] + [fdi_distribution(m, bins).skewness for m in sets[d].maps])
    if len(ids) > 1:
        rep.consistency = ensemble_consistency([sets[d] for d in sorted(month_days)],
                                               {d: burn[d] for d in month_days}, threshold)
    if baseline:
        for d in days:
            if d in baseline:
                rep.baseline.append(compare_baseline(results[d][0], baseline[d], burn[d],
                                                     (threshold, baseline_threshold)))
    rep.meta.update({"season_days": len(season_days), "month_days": len(month_days),
                     "no_fire_days": [int(d) for d in sorted(no_fire_days)], "members": len(ids),
                     "threshold": threshold, "levels": list(levels), "bins": bins})
    return rep
