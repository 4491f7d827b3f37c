"""Directory-based cube format.

``header.json`` holds the :class:`CubeHeader` fields plus ``crc64`` (hex
CRC-64/XZ per payload file).  Payloads are little-endian:

* ``chan_<name>.f32`` - float32, day-major then row-major (T, H, W)
* ``clc.u16``         - uint16 (H, W)
* ``susceptible.u8``  - uint8 0/1 (H, W)
* ``burn.u8``         - uint8 0/1, day-major (T, H, W)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import (
    ChecksumError,
    CubeFormatError,
    DataError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .crc import crc64_hex
from .cube import CHANNELS, FORMAT_VERSION, CubeHeader, DataCube


def _payloads(cube: DataCube):
    for i, name in enumerate(CHANNELS):
        yield f"chan_{name}.f32", np.ascontiguousarray(cube.channels[:, i], dtype="<f4")
    yield "clc.u16", np.ascontiguousarray(cube.clc, dtype="<u2")
    yield "susceptible.u8", cube.susceptible.astype("u1")
    yield "burn.u8", cube.burn.astype("u1")


def save_cube(cube: DataCube, path) -> dict:
    """Write ``cube`` under directory ``path``; returns the CRC table."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    crcs = {}
    for fname, arr in _payloads(cube):
        data = arr.tobytes()
        (path / fname).write_bytes(data)
        crcs[fname] = crc64_hex(data)
    header = cube.header.to_dict()
    header["crc64"] = crcs
    with open(path / "header.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return crcs


def _read(path: Path, fname: str, dtype, shape, crcs) -> np.ndarray:
    fpath = path / fname
    if not fpath.exists():
        raise TruncatedPayloadError(f"missing payload file {fpath}")
    data = fpath.read_bytes()
    need = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(data) < need:
        raise TruncatedPayloadError(f"{fpath}: payload has {len(data)} bytes, header implies {need}")
    if len(data) > need:
        raise CubeFormatError(f"{fpath}: payload has {len(data)} bytes, header implies {need}")
    if fname not in crcs:
        raise CubeFormatError(f"header carries no checksum for {fname}")
    if crc64_hex(data) != crcs[fname]:
        raise ChecksumError(f"{fpath}: CRC-64 mismatch")
    return np.frombuffer(data, dtype=dtype).reshape(shape)


def read_header(path) -> dict:
    path = Path(path)
    hfile = path / "header.json"
    if not hfile.exists():
        raise DataError(f"no cube found at {path} (missing header.json)")
    with open(hfile, encoding="utf-8") as fh:
        raw = json.load(fh)
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{hfile}: format version {version}, this reader supports {FORMAT_VERSION}")
    return raw


def load_cube(path) -> DataCube:
    """Load and fully verify a cube; raises before returning anything partial."""
    path = Path(path)
    raw = read_header(path)
    crcs = raw.pop("crc64", {})
    header = CubeHeader(**raw)
    t, h, w = header.n_days, header.height, header.width
    channels = np.empty((t, len(CHANNELS), h, w), dtype=np.float32)
    for i, name in enumerate(CHANNELS):
        channels[:, i] = _read(path, f"chan_{name}.f32", "<f4", (t, h, w), crcs)
    clc = _read(path, "clc.u16", "<u2", (h, w), crcs).astype(np.uint16)
    susceptible = _read(path, "susceptible.u8", "u1", (h, w), crcs).astype(bool)
    burn = _read(path, "burn.u8", "u1", (t, h, w), crcs).astype(bool)
    return DataCube(header, channels, clc, susceptible, burn)


def cube_crcs(path) -> dict:
    """CRC table recorded in a saved cube's header."""
    return dict(read_header(path).get("crc64", {}))
