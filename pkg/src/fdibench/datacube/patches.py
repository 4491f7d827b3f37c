"""Patch extraction around a pixel, with mirror padding at the map border."""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .cube import DataCube

PATCH_SIZE = 25


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Mirror indices into ``[0, n)`` without repeating the edge pixel."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def extract_patch(cube: DataCube, date: int, x: int, y: int, size: int = PATCH_SIZE,
                  temporal_len: int = 1, mirror: bool = True):
    """Raw patch centred on column ``x``, row ``y``.

    Returns ``(continuous, clc)``.  For ``temporal_len == 1`` shapes are
    (14, s, s) and (s, s); otherwise (T, 14, s, s) and (T, s, s) with the
    oldest day first and the event day last.  With ``mirror=False`` any
    out-of-bounds read is an error.
    """
    if temporal_len < 1:
        raise DataError(f"invalid temporal length {temporal_len}")
    if date < temporal_len - 1:
        raise DataError(f"date {date} has fewer than {temporal_len - 1} preceding days in the cube")
    if not 0 <= date < cube.header.n_days:
        raise DataError(f"date {date} outside the cube (0..{cube.header.n_days - 1})")
    h, w = cube.header.height, cube.header.width
    half = size // 2
    rows = np.arange(y - half, y - half + size)
    cols = np.arange(x - half, x - half + size)
    if mirror:
        rows, cols = reflect_index(rows, h), reflect_index(cols, w)
    elif rows[0] < 0 or cols[0] < 0 or rows[-1] >= h or cols[-1] >= w:
        raise DataError(f"patch at ({x}, {y}) crosses the map border")
    days = np.arange(date - temporal_len + 1, date + 1)
    cont = cube.channels[days][:, :, rows][:, :, :, cols]
    clc = np.broadcast_to(cube.clc[np.ix_(rows, cols)], (temporal_len, size, size)).copy()
    if temporal_len == 1:
        return cont[0], clc[0]
    return cont, clc
