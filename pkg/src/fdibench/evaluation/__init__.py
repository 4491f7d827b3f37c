"""Daily recall, recall quantiles, no-fire-day skewness, ensemble consistency, baseline comparison."""

from .assemble import assemble_report
from .report import EvalReport, heatmap_svg, histogram_svg, read_csv, read_report, write_report
from .stats import (
    N_BINS,
    QUANTILE_LEVELS,
    THRESHOLD,
    BaselineRow,
    ConsistencyRow,
    DailyRecallRecord,
    FdiDistribution,
    QuantileTable,
    compare_baseline,
    daily_recall,
    ensemble_consistency,
    false_alarm_fraction,
    fdi_distribution,
    fire_days,
    nearest_rank,
    recall_quantiles,
    rescale,
    select_no_fire_days,
    skewness,
)

__all__ = [
    "N_BINS", "QUANTILE_LEVELS", "THRESHOLD", "BaselineRow", "ConsistencyRow", "DailyRecallRecord",
    "EvalReport", "FdiDistribution", "QuantileTable", "assemble_report", "compare_baseline",
    "daily_recall", "ensemble_consistency", "false_alarm_fraction", "fdi_distribution", "fire_days",
    "heatmap_svg", "histogram_svg", "nearest_rank", "read_csv", "read_report", "recall_quantiles",
    "rescale", "select_no_fire_days", "skewness", "write_report",
]
