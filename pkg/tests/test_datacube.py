import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdibench.datacube import (
    CHANNELS,
    CubeHeader,
    DataCube,
    SyntheticConfig,
    crc64,
    crc64_hex,
    extract_patch,
    fit_normalizer,
    generate_synthetic_cube,
    load_cube,
    planted_logit,
    reflect_index,
    save_cube,
)
from fdibench.errors import ChecksumError, DataError, TruncatedPayloadError, VersionMismatchError


def test_crc64_check_value():
    assert crc64(b"123456789") == 0x995DC9BBDF1939FA
    assert crc64_hex(b"") == "0000000000000000"


def test_generator_is_deterministic_and_seed_sensitive():
    cfg = SyntheticConfig(height=24, width=24, years=3, fires_per_year=40, seed=5)
    a, b = generate_synthetic_cube(cfg), generate_synthetic_cube(cfg)
    assert a.equals(b)
    c = generate_synthetic_cube(replace(cfg, seed=6))
    assert not a.equals(c)


def test_generator_invariants(small_cube):
    cube = small_cube
    h = cube.header
    assert cube.channels.shape == (h.n_days, len(CHANNELS), h.height, h.width)
    assert not (cube.burn & ~cube.susceptible[None]).any()
    # fires only inside the season window
    for y in cube.years():
        days = cube.days_of_year(y)
        doy = days - days[0]
        assert not cube.burn[days[(doy < 15) | (doy >= 85)]].any()
    # static channels do not vary over time
    for name in ("dem", "slope", "population"):
        i = CHANNELS.index(name)
        assert np.array_equal(cube.channels[0, i], cube.channels[-1, i])


def test_planted_signal_ranks_fires_above_quiet_pixels(small_cube):
    logit = planted_logit(small_cube.channels, small_cube.clc, SyntheticConfig().coefficients, 1.0)
    fire = logit[small_cube.burn]
    quiet = logit[~small_cube.burn & small_cube.susceptible[None]]
    assert np.median(fire) > np.quantile(quiet, 0.9)


def test_generator_rejects_impossible_targets():
    with pytest.raises(DataError):
        generate_synthetic_cube(SyntheticConfig(height=16, width=16, fires_per_year=10**6))
    with pytest.raises(DataError):
        SyntheticConfig(fire_window=(50, 20))


def test_cube_roundtrip(tmp_path, small_cube):
    crcs = save_cube(small_cube, tmp_path / "c")
    back = load_cube(tmp_path / "c")
    assert back.equals(small_cube)
    assert set(crcs) == {f"chan_{c}.f32" for c in CHANNELS} | {"clc.u16", "susceptible.u8", "burn.u8"}


def test_cube_corruption_is_detected(tmp_path, small_cube):
    d = tmp_path / "c"
    save_cube(small_cube, d)
    f = d / "chan_ndvi.f32"
    data = bytearray(f.read_bytes())
    data[100] ^= 0x01
    f.write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load_cube(d)
    f.write_bytes(bytes(data[:-4]))
    with pytest.raises(TruncatedPayloadError):
        load_cube(d)


def test_cube_version_and_missing(tmp_path, small_cube):
    with pytest.raises(DataError, match="missing header"):
        load_cube(tmp_path / "nothing")
    d = tmp_path / "c"
    save_cube(small_cube, d)
    hdr = json.loads((d / "header.json").read_text())
    hdr["format_version"] = 99
    (d / "header.json").write_text(json.dumps(hdr))
    with pytest.raises(VersionMismatchError):
        load_cube(d)


def test_header_validation():
    with pytest.raises(DataError, match="schema"):
        CubeHeader(4, 4, 1, "2009-01-01", channels=("a",))


def test_cube_rejects_burn_outside_susceptible(small_cube):
    burn = small_cube.burn.copy()
    ys, xs = np.nonzero(~small_cube.susceptible)
    burn[20, ys[0], xs[0]] = True
    with pytest.raises(DataError):
        DataCube(small_cube.header, small_cube.channels, small_cube.clc, small_cube.susceptible, burn)


@given(st.integers(-60, 80), st.integers(1, 20))
def test_reflect_index_matches_numpy_reflect(i, n):
    pad = 100
    ref = np.pad(np.arange(n), pad, mode="reflect") if n > 1 else np.zeros(2 * pad + n, int)
    assert reflect_index(np.array([i]), n)[0] == ref[i + pad]


def test_reflect_index_examples():
    np.testing.assert_array_equal(reflect_index(np.arange(-2, 7), 5), [2, 1, 0, 1, 2, 3, 4, 3, 2])


def test_patch_shapes_and_centre(small_cube):
    cont, clc = extract_patch(small_cube, 30, 10, 12)
    assert cont.shape == (14, 25, 25) and clc.shape == (25, 25)
    np.testing.assert_array_equal(cont[:, 12, 12], small_cube.channels[30, :, 12, 10])
    seq, sclc = extract_patch(small_cube, 30, 10, 12, size=7, temporal_len=4)
    assert seq.shape == (4, 14, 7, 7) and sclc.shape == (4, 7, 7)
    np.testing.assert_array_equal(seq[-1, :, 3, 3], small_cube.channels[30, :, 12, 10])
    np.testing.assert_array_equal(seq[0, :, 3, 3], small_cube.channels[27, :, 12, 10])


def test_patch_mirror_at_corner(small_cube):
    cont, _ = extract_patch(small_cube, 5, 0, 0, size=5)
    np.testing.assert_array_equal(cont[:, 0, 0], small_cube.channels[5, :, 2, 2])
    np.testing.assert_array_equal(cont[:, 2, 2], small_cube.channels[5, :, 0, 0])


def test_patch_errors(small_cube):
    with pytest.raises(DataError):
        extract_patch(small_cube, 2, 10, 10, temporal_len=5)
    with pytest.raises(DataError):
        extract_patch(small_cube, small_cube.header.n_days, 10, 10)
    with pytest.raises(DataError, match="border"):
        extract_patch(small_cube, 5, 1, 1, mirror=False)


def test_normalizer_reads_only_training_days(small_cube):
    norm = fit_normalizer(small_cube, (0, 50))
    frames = small_cube.channels[:50].astype(np.float64)
    np.testing.assert_allclose(norm.mean, frames.mean(axis=(0, 2, 3)), rtol=1e-5)
    np.testing.assert_allclose(norm.std, np.maximum(frames.std(axis=(0, 2, 3)), 1e-6), rtol=1e-5)
    # poisoning days outside the range must not change the fit
    poisoned = DataCube(small_cube.header, small_cube.channels.copy(), small_cube.clc,
                        small_cube.susceptible, small_cube.burn)
    poisoned.channels[50:] = 1e6
    again = fit_normalizer(poisoned, (0, 50))
    np.testing.assert_array_equal(again.mean, norm.mean)
    with pytest.raises(DataError):
        fit_normalizer(small_cube, (10, 10))


def test_normalizer_roundtrip(tmp_path, small_norm):
    small_norm.save(tmp_path / "n.json")
    back = type(small_norm).load(tmp_path / "n.json")
    np.testing.assert_array_equal(back.mean, small_norm.mean)
    np.testing.assert_array_equal(back.std, small_norm.std)
