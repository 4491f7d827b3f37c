"""Weights format: ``model.json`` manifest + ``weights.f32`` payload.

The manifest holds the model config, training provenance and one entry per
array (name, shape, element offset, CRC-64 of its bytes).  ``weights.f32``
is the little-endian float32 concatenation of the arrays in manifest order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..datacube.crc import crc64_hex
from ..errors import ChecksumError, DataError, TruncatedPayloadError
from .arch import ModelBundle, ModelConfig

WEIGHTS_VERSION = 1


def save_weights(bundle: ModelBundle, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = bundle.state_arrays()
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "crc64": crc64_hex(data)})
        chunks.append(data)
        offset += arr.size
    (path / "weights.f32").write_bytes(b"".join(chunks))
    manifest = {
        "format_version": WEIGHTS_VERSION,
        "config": bundle.config.to_dict(),
        "provenance": bundle.provenance,
        "arrays": entries,
        "total_elements": offset,
    }
    with open(path / "model.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_weights(path, expected_arch: str | None = None) -> ModelBundle:
    """Rebuild a bundle from disk, verifying every array's checksum."""
    path = Path(path)
    mfile = path / "model.json"
    if not mfile.exists():
        raise DataError(f"no model found at {path} (missing model.json)")
    manifest = json.loads(mfile.read_text(encoding="utf-8"))
    if manifest.get("format_version") != WEIGHTS_VERSION:
        raise DataError(f"{mfile}: unsupported weights format {manifest.get('format_version')}")
    config = ModelConfig(**manifest["config"])
    if expected_arch is not None and config.arch != expected_arch:
        raise DataError(f"{mfile}: holds a {config.arch} model, expected {expected_arch}")
    bundle = ModelBundle(config)
    expected = bundle.state_arrays()
    names = [e["name"] for e in manifest["arrays"]]
    if names != list(expected):
        raise DataError(f"{mfile}: array manifest does not match a {config.arch} with this config")
    raw = (path / "weights.f32").read_bytes() if (path / "weights.f32").exists() else b""
    if len(raw) != 4 * manifest["total_elements"]:
        raise TruncatedPayloadError(
            f"{path / 'weights.f32'}: {len(raw)} bytes, manifest implies {4 * manifest['total_elements']}")
    flat = np.frombuffer(raw, dtype="<f4")
    arrays = {}
    for e in manifest["arrays"]:
        shape = tuple(e["shape"])
        if shape != expected[e["name"]].shape:
            raise DataError(f"{mfile}: {e['name']} has shape {shape}, config implies {expected[e['name']].shape}")
        n = int(np.prod(shape))
        chunk = flat[e["offset"]:e["offset"] + n]
        if crc64_hex(chunk.tobytes()) != e["crc64"]:
            raise ChecksumError(f"{path / 'weights.f32'}: CRC-64 mismatch in {e['name']}")
        arrays[e["name"]] = chunk.reshape(shape)
    bundle.load_state_arrays(arrays)
    bundle.provenance = manifest.get("provenance", {})
    return bundle
