"""Patch-classifier architectures and weight files."""

from .arch import (
    ARCHITECTURES,
    PAPER_BUDGETS,
    ModelBundle,
    ModelConfig,
    budget_report,
    build_model,
    count_params,
    default_config,
    with_seed,
)
from .io import load_weights, save_weights

__all__ = [
    "ARCHITECTURES", "PAPER_BUDGETS", "ModelBundle", "ModelConfig", "budget_report",
    "build_model", "count_params", "default_config", "load_weights", "save_weights", "with_seed",
]
