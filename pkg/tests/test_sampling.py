import numpy as np
import pytest

from fdibench.errors import DataError, SamplingError, UsageError
from fdibench.sampling import (
    FIRE,
    NOFIRE,
    SamplingConfig,
    admitted_fire_classes,
    assemble_dataset,
    audit_sampling_rules,
    build_samples,
    chronological_split,
    fire_clc_histogram,
    make_samples,
    read_manifest,
    select_fire_samples,
    write_manifest,
)

CFG = SamplingConfig(patch_size=9)


@pytest.fixture(scope="module")
def samples(small_cube):
    return build_samples(small_cube, CFG)


def test_generated_samples_pass_audit(small_cube, samples):
    assert audit_sampling_rules(small_cube, samples, CFG) == []
    for y in small_cube.years():
        s = samples[samples["year"] == y]
        assert (s["label"] == NOFIRE).sum() == 2 * (s["label"] == FIRE).sum()


def test_sampling_is_deterministic(small_cube, samples):
    assert np.array_equal(build_samples(small_cube, CFG), samples)
    other = build_samples(small_cube, SamplingConfig(patch_size=9, seed=1))
    assert not np.array_equal(other, samples)


def _neg(samples):
    return np.nonzero(samples["label"] == NOFIRE)[0]


def test_audit_flags_each_rule(small_cube, samples):
    cube = small_cube
    year = int(samples["year"][0])
    days = cube.days_of_year(year)
    fire_days = [d for d in days if cube.burn[d].any()]
    i = _neg(samples)[samples["year"][_neg(samples)] == year][0]

    def flagged(mutated, rule):
        return any(v.startswith(rule) for v in audit_sampling_rules(cube, mutated, CFG))

    assert flagged(np.delete(samples, i), "rule1")
    s = samples.copy(); s["date"][i] = days[0]  # noqa: E702 - before the season
    assert flagged(s, "rule2")
    s = samples.copy(); s["date"][i] = fire_days[len(fire_days) // 2]  # noqa: E702
    assert flagged(s, "rule3")
    bad = [(x, y) for y in range(4, 28) for x in range(4, 28) if cube.clc[y, x] not in CFG.susceptible_classes]
    s = samples.copy(); s["x"][i], s["y"][i] = bad[0]  # noqa: E702
    assert flagged(s, "rule4")
    f = samples[(samples["label"] == FIRE) & (samples["year"] == year)][0]
    s = samples.copy(); s["x"][i], s["y"][i] = f["x"], f["y"]  # noqa: E702
    assert flagged(s, "rule5")
    j = _neg(samples)[samples["year"][_neg(samples)] == year][1]
    s = samples.copy(); s["x"][i], s["y"][i] = s["x"][j], s["y"][j]  # noqa: E702
    assert flagged(s, "rule6")
    s = samples.copy(); s["x"][i] = 0  # noqa: E702
    assert flagged(s, "border")


def test_fire_samples_respect_class_filter(small_cube, samples):
    admitted = admitted_fire_classes(fire_clc_histogram(small_cube), CFG)
    fire = samples[samples["label"] == FIRE]
    assert set(small_cube.clc[fire["y"], fire["x"]].tolist()) <= set(admitted)
    # one sample per burn location per year
    keys = set(zip(fire["year"].tolist(), fire["x"].tolist(), fire["y"].tolist()))
    assert len(keys) == len(fire)


def test_admitted_classes_by_coverage_and_threshold():
    hist = np.array([0, 0, 50, 30, 15, 5, 0])
    assert admitted_fire_classes(hist, SamplingConfig(clc_coverage=0.95)) == (2, 3, 4)
    assert admitted_fire_classes(hist, SamplingConfig(clc_coverage=0.8)) == (2, 3)
    assert admitted_fire_classes(hist, SamplingConfig(clc_threshold=0.1)) == (2, 3, 4)
    assert admitted_fire_classes(hist, SamplingConfig(fire_classes=(5,))) == (5,)


def test_negative_pool_exhaustion_names_year(small_cube):
    with pytest.raises(SamplingError, match="year"):
        build_samples(small_cube, SamplingConfig(patch_size=9, ratio=200))


def test_no_fire_samples_when_filter_leaves_nothing(small_cube):
    with pytest.raises(SamplingError):
        select_fire_samples(small_cube, SamplingConfig(patch_size=9, fire_classes=(0,)))


def test_chronological_split(samples):
    sp = chronological_split(samples, [2009], [2010], [2011])
    assert set(sp.train["year"].tolist()) == {2009}
    assert len(sp.train) + len(sp.val) + len(sp.test) == len(samples)
    with pytest.raises(UsageError, match="overlap"):
        chronological_split(samples, [2009], [2009], [2011])
    with pytest.raises(UsageError, match="not assigned"):
        chronological_split(samples, [2009], [2010], [])


def test_manifest_roundtrip(tmp_path, samples):
    write_manifest(samples, tmp_path / "s.csv")
    assert np.array_equal(read_manifest(tmp_path / "s.csv"), samples)
    assert (tmp_path / "s.csv").read_bytes().startswith(b"year,date_index,x,y,label\n")
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        read_manifest(tmp_path / "bad.csv")


def test_assemble_dataset(small_cube, small_norm, samples):
    ds = assemble_dataset(small_cube, samples[:10], small_norm, patch_size=9)
    assert ds.x.shape == (10, 14, 9, 9) and ds.x.dtype == np.float32
    s = samples[0]
    raw = small_cube.channels[s["date"], :, s["y"], s["x"]]
    np.testing.assert_allclose(ds.x[0, :, 4, 4], (raw - small_norm.mean) / small_norm.std, rtol=1e-6)
    early = make_samples([2009, 2009], [1, 40], [10, 10], [10, 10], NOFIRE)
    seq = assemble_dataset(small_cube, early, small_norm, temporal_len=3, patch_size=9)
    assert len(seq) == 1 and seq.x.shape == (1, 3, 14, 9, 9)
