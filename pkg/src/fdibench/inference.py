"""Dense FDI maps: one patch forward per susceptible pixel, plus ensemble averaging."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .datacube import DataCube, Normalizer, crc64_hex, reflect_index
from .errors import DataError
from .models import ModelBundle

log = logging.getLogger(__name__)


@dataclass
class FdiMap:
    values: np.ndarray  # (H, W) float32, 0 where invalid
    mask: np.ndarray  # (H, W) bool
    date: int
    model_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise DataError(f"map values {self.values.shape} and mask {self.mask.shape} disagree")

    @property
    def valid(self) -> np.ndarray:
        return self.values[self.mask]

    def mask_crc(self) -> str:
        return crc64_hex(np.packbits(self.mask).tobytes())


@dataclass
class EnsembleMapSet:
    maps: list
    member_ids: list = field(default_factory=list)

    def __post_init__(self):
        if not self.maps:
            raise DataError("an ensemble needs at least one member map")
        if not self.member_ids:
            self.member_ids = [m.model_id for m in self.maps]
        first = self.maps[0]
        for m in self.maps[1:]:
            if m.date != first.date:
                raise DataError(f"member maps mix dates {first.date} and {m.date}")
            if m.mask.shape != first.mask.shape or not np.array_equal(m.mask, first.mask):
                raise DataError(f"validity mask of {m.model_id or 'member'} differs from {first.model_id or 'member 0'}")


def _padded_frames(cube: DataCube, date: int, temporal_len: int, half: int, normalizer: Normalizer):
    """Normalized frames for days ``date-T+1..date``, mirror-padded by ``half``."""
    h, w = cube.header.height, cube.header.width
    rows = reflect_index(np.arange(-half, h + half), h)
    cols = reflect_index(np.arange(-half, w + half), w)
    days = np.arange(date - temporal_len + 1, date + 1)
    frames = cube.channels[days][:, :, rows][:, :, :, cols]
    clc = cube.clc[np.ix_(rows, cols)]
    return normalizer.apply(frames), clc


def full_map_inference(bundle: ModelBundle, cube: DataCube, date: int, normalizer: Normalizer,
                       batch: int = 256, threads: int = 1, model_id: str = "") -> FdiMap:
    """FDI at every susceptible pixel; other pixels are masked out.

    Pixels are processed in fixed batches; each pixel's result depends only
    on its own patch, so batch width and thread count do not change output.
    """
    cfg = bundle.config
    t = cfg.temporal_len
    if not 0 <= date < cube.header.n_days:
        raise DataError(f"date {date} outside the cube (0..{cube.header.n_days - 1})")
    if date < t - 1:
        raise DataError(f"date {date} lacks the {t - 1} preceding days the model needs")
    mask = cube.susceptible.copy()
    values = np.zeros(mask.shape, np.float32)
    ys, xs = np.nonzero(mask)
    if len(ys):
        size = cfg.patch_size
        frames, clc = _padded_frames(cube, date, t, size // 2, normalizer)
        fwin = sliding_window_view(frames, (size, size), axis=(-2, -1))  # (T, C, H, W, s, s)
        cwin = sliding_window_view(clc, (size, size))  # (H, W, s, s)

        def run(s):
            yy, xx = ys[s:s + batch], xs[s:s + batch]
            x = np.moveaxis(fwin[:, :, yy, xx], 2, 0)  # (n, T, C, s, s)
            c = cwin[yy, xx]
            if t == 1:
                x = x[:, 0]
            else:
                c = np.broadcast_to(c[:, None], (len(yy), t, size, size))
            values[yy, xx] = bundle.predict_fdi(np.ascontiguousarray(x), np.ascontiguousarray(c))

        starts = range(0, len(ys), batch)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                list(ex.map(run, starts))
        else:
            for s in starts:
                run(s)
    return FdiMap(values, mask, int(date), model_id)


def ensemble_average(maps: EnsembleMapSet | list, model_id: str = "ensemble") -> FdiMap:
    """Pixel-wise member mean, accumulated in float64 in member order."""
    if not isinstance(maps, EnsembleMapSet):
        maps = EnsembleMapSet(list(maps))
    first = maps.maps[0]
    acc = np.zeros(first.values.shape, np.float64)
    for m in maps.maps:
        acc += m.values
    acc /= len(maps.maps)
    values = np.where(first.mask, acc, 0.0).astype(np.float32)
    return FdiMap(values, first.mask.copy(), first.date, model_id)


# ---------------------------------------------------------------- on-disk maps

def quantize(fdi_map: FdiMap) -> np.ndarray:
    """8-bit view: 1 + round(254 * FDI) on valid pixels, 0 elsewhere."""
    q = 1 + np.rint(254.0 * np.clip(fdi_map.values.astype(np.float64), 0.0, 1.0))
    return np.where(fdi_map.mask, q, 0).astype(np.uint8)


def write_sidecar(fdi_map: FdiMap, out_dir, extra: dict | None = None) -> Path:
    """Lossless ``fdi_<date>.f32`` (NaN where invalid) and its ``.json`` metadata."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"fdi_{fdi_map.date}"
    h, w = fdi_map.values.shape
    raw = np.where(fdi_map.mask, fdi_map.values, np.float32(np.nan)).astype("<f4")
    stem.with_suffix(".f32").write_bytes(raw.tobytes())
    meta = {"date": fdi_map.date, "model_id": fdi_map.model_id, "height": h, "width": w,
            "mask_crc64": fdi_map.mask_crc(), "data_crc64": crc64_hex(raw.tobytes())}
    meta.update(extra or {})
    with open(stem.with_suffix(".json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return stem.with_suffix(".f32")


def render_map(fdi_map: FdiMap, out_dir, extra: dict | None = None) -> Path:
    """Write the ``fdi_<date>.pgm`` view plus the lossless sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    h, w = fdi_map.values.shape
    with open(out_dir / f"fdi_{fdi_map.date}.pgm", "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quantize(fdi_map).tobytes())
    return write_sidecar(fdi_map, out_dir, extra)


def read_sidecar(out_dir, date: int):
    """Load ``fdi_<date>`` back; returns (FdiMap, metadata dict)."""
    stem = Path(out_dir) / f"fdi_{date}"
    jpath, fpath = stem.with_suffix(".json"), stem.with_suffix(".f32")
    if not jpath.exists() or not fpath.exists():
        raise DataError(f"map sidecar missing: {fpath}")
    meta = json.loads(jpath.read_text(encoding="utf-8"))
    raw = fpath.read_bytes()
    h, w = meta["height"], meta["width"]
    if len(raw) != 4 * h * w:
        raise DataError(f"{fpath}: {len(raw)} bytes, expected {4 * h * w}")
    if "data_crc64" in meta and crc64_hex(raw) != meta["data_crc64"]:
        raise DataError(f"{fpath}: checksum mismatch")
    arr = np.frombuffer(raw, dtype="<f4").reshape(h, w)
    mask = ~np.isnan(arr)
    fmap = FdiMap(np.where(mask, arr, 0).astype(np.float32), mask, int(meta["date"]), meta.get("model_id", ""))
    if fmap.mask_crc() != meta["mask_crc64"]:
        raise DataError(f"{fpath}: validity mask does not match its recorded checksum")
    return fmap, meta


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+255\s", data)
    if not m:
        raise DataError(f"{path}: not an 8-bit binary graymap")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end():m.end() + w * h], dtype=np.uint8).reshape(h, w)
