"""CRC-64/XZ (ECMA-182 polynomial, reflected, all-ones init and xor-out)."""

from __future__ import annotations

import numba
import numpy as np

_POLY = np.uint64(0xC96C5795D7870F42)


def _make_table():
    table = np.zeros(256, dtype=np.uint64)
    for i in range(256):
        crc = np.uint64(i)
        for _ in range(8):
            if crc & np.uint64(1):
                crc = (crc >> np.uint64(1)) ^ _POLY
            else:
                crc = crc >> np.uint64(1)
        table[i] = crc
    return table


_TABLE = _make_table()


@numba.njit(cache=True, nogil=True)
def _update(crc, data, table):
    for b in data:
        crc = table[(crc ^ numba.uint64(b)) & numba.uint64(0xFF)] ^ (crc >> numba.uint64(8))
    return crc


def crc64(data) -> int:
    """CRC-64/XZ of a bytes-like object or numpy array (raw memory)."""
    if isinstance(data, np.ndarray):
        buf = np.ascontiguousarray(data).view(np.uint8).reshape(-1)
    else:
        buf = np.frombuffer(bytes(data), dtype=np.uint8)
    crc = _update(np.uint64(0xFFFFFFFFFFFFFFFF), buf, _TABLE)
    return int(crc ^ np.uint64(0xFFFFFFFFFFFFFFFF))


def crc64_hex(data) -> str:
    return f"{crc64(data):016x}"
