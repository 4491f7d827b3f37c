"""Datacube model, on-disk format, synthetic generator and patch access."""

from .crc import crc64, crc64_hex
from .cube import CHANNELS, STATIC_CHANNELS, CubeHeader, DataCube
from .io import cube_crcs, load_cube, save_cube
from .normalize import Normalizer, apply_normalizer, fit_normalizer
from .patches import PATCH_SIZE, extract_patch, reflect_index
from .synthetic import (
    N_CLC_CLASSES,
    SUSCEPTIBLE_CLASSES,
    SyntheticConfig,
    generate_synthetic_cube,
    planted_logit,
    weather_index,
)

__all__ = [
    "CHANNELS", "N_CLC_CLASSES", "PATCH_SIZE", "STATIC_CHANNELS", "SUSCEPTIBLE_CLASSES",
    "CubeHeader", "DataCube", "Normalizer", "SyntheticConfig", "apply_normalizer", "crc64",
    "crc64_hex", "cube_crcs", "extract_patch", "fit_normalizer", "generate_synthetic_cube",
    "load_cube", "planted_logit", "reflect_index", "save_cube", "weather_index",
]
