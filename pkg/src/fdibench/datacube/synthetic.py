"""Planted-signal synthetic datacube.

The fire process is a known logistic model over standardized channels, so
the Bayes-optimal score of every pixel-day is available via
:func:`planted_logit` for desk-scale skill checks.

Land-cover classes (15):

====  =========================  ============
idx   role                       susceptible
====  =========================  ============
0     urban fabric               no
1     industrial / transport     no
2     non-irrigated arable       yes
3     permanent crops            yes
4     pastures                   yes
5     heterogeneous agriculture  yes
6     broad-leaved forest        yes
7     coniferous forest          yes
8     mixed forest               yes
9     natural grassland          yes
10    moors and heathland        yes
11    sclerophyllous vegetation  yes
12    transitional shrub         yes
13    sparsely vegetated         yes
14    water bodies               no
====  =========================  ============
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import DataError
from .cube import CHANNELS, CubeHeader, DataCube

N_CLC_CLASSES = 15
SUSCEPTIBLE_CLASSES = tuple(range(2, 14))
# relative frequency bias of each class in the blob map
_CLC_BIAS = np.array([0.9, 0.4, 0.4, 0.0, 0.1, 0.3, 0.3, 0.5, 0.3, 0.2, 0.0, 0.5, 0.4, -0.4, 0.8])
# planted per-class hazard offset; agriculture low, shrubs/conifers high
CLC_HAZARD = np.array([0, 0, -1.0, -0.8, -0.5, -0.6, 0.3, 0.8, 0.5, 0.2, 0.4, 1.0, 0.7, -2.5, 0])
_NDVI_BASE = np.array([0.2, 0.1, 0.45, 0.5, 0.55, 0.45, 0.75, 0.7, 0.72, 0.5, 0.45, 0.5, 0.55, 0.2, 0.0])

DEFAULT_COEFFICIENTS = {
    "t2m_max": 2.0,
    "lst_day": 0.6,
    "rh_min": -2.0,
    "wind_max": 1.0,
    "tp_max": -0.8,
    "ndvi": -0.4,
    "dist_roads": -0.4,
    "population": 0.3,
}


@dataclass
class SyntheticConfig:
    height: int = 96
    width: int = 96
    years: int = 3
    days_per_year: int = 100
    start_year: int = 2009
    coefficients: dict = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    clc_weight: float = 1.0
    intercept: float = -6.0
    noise: float = 0.3
    fire_window: tuple = (15, 85)
    fires_per_year: int = 900
    anomaly_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.fire_window = tuple(self.fire_window)
        lo, hi = self.fire_window
        if not 0 <= lo < hi <= self.days_per_year:
            raise DataError(f"fire window {self.fire_window} is empty or outside a {self.days_per_year}-day year")
        for name, v in self.coefficients.items():
            if name not in CHANNELS:
                raise DataError(f"planted coefficient for unknown channel {name!r}")
            if not np.isfinite(v):
                raise DataError(f"planted coefficient for {name!r} is not finite")
        if self.height < 13 or self.width < 13:
            raise DataError("grid must be at least 13x13")


def _smooth_field(rng, shape, sigma):
    f = gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return (f - f.mean()) / (f.std() + 1e-12)


def _ar1(rng, n, phi):
    out = np.empty(n)
    out[0] = rng.standard_normal()
    s = np.sqrt(1 - phi * phi)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + s * rng.standard_normal()
    return out


def _ar1_fields(rng, n, shape, phi, sigma):
    out = np.empty((n,) + shape)
    s = np.sqrt(1 - phi * phi)
    cur = _smooth_field(rng, shape, sigma)
    for i in range(n):
        if i:
            cur = phi * cur + s * _smooth_field(rng, shape, sigma)
        out[i] = cur
    return out


def _standardize(channels):
    """Global per-channel z-scores, computed from the cube itself."""
    x = channels.astype(np.float64)
    mean = x.mean(axis=(0, 2, 3), keepdims=True)
    std = x.std(axis=(0, 2, 3), keepdims=True)
    return (x - mean) / np.maximum(std, 1e-6)


def planted_logit(channels, clc, coefficients, clc_weight, intercept=0.0):
    """Noise-free planted hazard z(x, t), shape (T, H, W)."""
    z = _standardize(channels)
    out = np.full((channels.shape[0],) + channels.shape[2:], float(intercept))
    for name, coef in coefficients.items():
        out += coef * z[:, CHANNELS.index(name)]
    out += clc_weight * CLC_HAZARD[clc][None]
    return out


def generate_synthetic_cube(config: SyntheticConfig) -> DataCube:
    """Deterministic planted-signal cube for ``config``."""
    rng = np.random.default_rng(config.seed)
    h, w = config.height, config.width
    dpy = config.days_per_year
    t = config.years * dpy
    shape = (h, w)
    big = max(h, w) / 8.0

    # static fields
    dem = 600 + 450 * _smooth_field(rng, shape, big)
    dem = np.clip(dem, 0, None)
    gy, gx = np.gradient(dem)
    slope = np.degrees(np.arctan(np.hypot(gx, gy) / 1000.0))
    dist_roads = 2.0 * np.exp(0.8 * _smooth_field(rng, shape, big / 2))
    dist_water = 4.0 * np.exp(0.6 * _smooth_field(rng, shape, big))
    population = np.exp(3.0 + 1.2 * _smooth_field(rng, shape, big / 2))

    # land cover blobs
    fields = np.stack([_smooth_field(rng, shape, big / 2) for _ in range(N_CLC_CLASSES)])
    clc = np.argmax(fields + _CLC_BIAS[:, None, None], axis=0).astype(np.uint16)
    susceptible = np.isin(clc, SUSCEPTIBLE_CLASSES)

    # weather
    days = np.arange(t)
    doy = days % dpy
    season = -np.cos(2 * np.pi * doy / dpy)[:, None, None]
    anomaly = config.anomaly_scale * _ar1(rng, t, 0.7)[:, None, None]
    wind_reg = _ar1(rng, t, 0.5)[:, None, None]
    local = _ar1_fields(rng, t, shape, 0.6, big / 2)
    local2 = _ar1_fields(rng, t, shape, 0.3, big / 3)

    t2m = 18 + 9 * season + 4 * anomaly + 1.5 * local - 0.0065 * dem[None]
    lst_day = t2m + 6 + 2 * local2 + 0.004 * (1.0 - _NDVI_BASE[clc])[None] * 1000
    lst_night = t2m - 11 + 1.2 * local2
    rh = np.clip(55 - 12 * season - 11 * anomaly - 4 * local + 3 * local2, 5, 100)
    dew = t2m - (100 - rh) / 5.0
    sp = 1013.0 - 0.12 * dem[None] + 3 * wind_reg - 2 * anomaly
    rain_logit = -1.5 - 1.8 * anomaly - 0.8 * season + 0.8 * local2
    rain_amt = rng.gamma(2.0, 3.0, size=(t,) + shape)
    tp = np.where(rng.random((t,) + shape) < 1 / (1 + np.exp(-rain_logit)), rain_amt, 0.0)
    wind = np.abs(5 + 2.2 * wind_reg + 1.2 * local2 + 0.002 * dem[None])

    # vegetation index: 10-day cadence
    ndvi_day = np.clip(
        _NDVI_BASE[clc][None] - 0.12 * season + 0.05 * _ar1_fields(rng, t, shape, 0.9, big / 2), -0.1, 1.0
    )
    ndvi = ndvi_day[(days // 10) * 10]

    chans = {
        "ndvi": ndvi,
        "lst_day": lst_day,
        "lst_night": lst_night,
        "dewpoint_max": dew,
        "t2m_max": t2m,
        "sp_max": sp,
        "tp_max": tp,
        "wind_max": wind,
        "rh_min": rh,
        "dem": np.broadcast_to(dem, (t,) + shape),
        "slope": np.broadcast_to(slope, (t,) + shape),
        "dist_roads": np.broadcast_to(dist_roads, (t,) + shape),
        "dist_waterway": np.broadcast_to(dist_water, (t,) + shape),
        "population": np.broadcast_to(population, (t,) + shape),
    }
    channels = np.empty((t, len(CHANNELS), h, w), dtype=np.float32)
    for i, name in enumerate(CHANNELS):
        channels[:, i] = chans[name]
    del chans, local, local2

    # planted fire process
    z = planted_logit(channels, clc, config.coefficients, config.clc_weight, config.intercept)
    z += config.noise * rng.standard_normal(z.shape)
    prob = 1.0 / (1.0 + np.exp(-z))
    lo, hi = config.fire_window
    eligible = ((doy >= lo) & (doy < hi))[:, None, None] & susceptible[None]
    prob = np.where(eligible, prob, 0.0)
    n_eligible = int(eligible[:dpy].sum())
    if config.fires_per_year > n_eligible:
        raise DataError(
            f"target of {config.fires_per_year} fires/year exceeds the {n_eligible} susceptible pixel-days per year"
        )
    for y in range(config.years):
        sl = slice(y * dpy, (y + 1) * dpy)
        total = prob[sl].sum()
        if total > 0:
            prob[sl] = np.minimum(prob[sl] * (config.fires_per_year / total), 1.0)
    burn = rng.random(prob.shape) < prob

    header = CubeHeader(
        height=h,
        width=w,
        n_days=t,
        start_date=f"{config.start_year:04d}-01-01",
        n_clc_classes=N_CLC_CLASSES,
        generator_seed=config.seed,
        days_per_year=dpy,
    )
    return DataCube(header, channels, clc, susceptible, burn)


def weather_index(cube: DataCube, day: int) -> np.ndarray:
    """Weather-only danger raster used as a stand-in baseline map.

    Hot, dry, windy days score high regardless of land cover or fuel; it
    plays the role of a process-based index in baseline comparisons.
    """
    f = cube.frame(day).astype(np.float64)
    t2m = f[CHANNELS.index("t2m_max")]
    rh = f[CHANNELS.index("rh_min")]
    wind = f[CHANNELS.index("wind_max")]
    return np.clip(t2m, 0, None) * (100 - rh) / 100.0 * np.sqrt(wind)
