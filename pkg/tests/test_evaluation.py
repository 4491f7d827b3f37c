import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import skew

from fdibench.errors import DataError
from fdibench.evaluation import (
    DailyRecallRecord,
    EvalReport,
    compare_baseline,
    daily_recall,
    ensemble_consistency,
    fdi_distribution,
    read_csv,
    read_report,
    recall_quantiles,
    rescale,
    select_no_fire_days,
    skewness,
    write_report,
)
from fdibench.inference import FdiMap


def fmap(values, mask=None, date=0):
    v = np.asarray(values, np.float32)
    return FdiMap(v, np.ones(v.shape, bool) if mask is None else mask, date)


def test_daily_recall_examples():
    m = fmap([[0.6, 0.4, 0.9, 0.51, 0.99]])
    burn = np.array([[True, True, True, True, False]])
    rec = daily_recall(m, burn)
    assert (rec.fires, rec.detected, rec.recall) == (4, 3, 0.75)
    assert daily_recall(fmap([[0.5, 0.5]]), np.ones((1, 2), bool)).recall == 0.0
    assert daily_recall(m, np.zeros((1, 5), bool)) is None


def test_daily_recall_ignores_fires_outside_mask():
    mask = np.array([[True, False]])
    rec = daily_recall(fmap([[0.9, 0.0]], mask), np.ones((1, 2), bool))
    assert (rec.fires, rec.recall) == (1, 1.0)


def test_quantile_examples():
    assert recall_quantiles([1.0]).values == (1.0,) * 6
    q = recall_quantiles([1.0, 0.6, 0.2, 0.8, 0.4], levels=[40])
    assert q.values == (0.4,) and q.n_days == 5
    # 70% of 10 days is exactly rank 7, not 8
    assert recall_quantiles([i / 10 for i in range(10)], levels=[70]).values == (0.6,)
    with pytest.raises(DataError):
        recall_quantiles([])


def test_skewness_examples():
    assert skewness([0.3, 0.5, 0.7]) == pytest.approx(0.0, abs=1e-12)
    assert skewness([0.1, 0.1, 0.1, 0.9]) > 0
    assert skewness([0.4] * 5) == 0.0
    with pytest.raises(DataError):
        fdi_distribution(fmap([[0.1, 0.2]]))


def test_histogram_edges():
    d = fdi_distribution(fmap([[0.0, 0.05, 1.0, 0.999, 0.5]]), bins=20)
    assert sum(d.counts) == d.n_valid == 5
    assert d.counts[0] == 1 and d.counts[1] == 1 and d.counts[19] == 2 and d.counts[10] == 1


def test_consistency_examples():
    burn = {0: np.array([[True]])}
    rows = ensemble_consistency([[fmap([[0.4]]), fmap([[0.8]])]], burn)
    assert (rows[0].lhs, rows[0].rhs, rows[0].gap) == (0.5, 1.0, 0.5)
    same = fmap([[0.7, 0.2]])
    rows = ensemble_consistency([[same, same, same]], {0: np.array([[True, True]])})
    assert rows[0].gap == 0.0
    with pytest.raises(DataError):
        ensemble_consistency([[same]], {0: np.array([[True, True]])})


def test_baseline_examples():
    m = fmap([[0.9, 0.1, 0.7, 0.2]])
    burn = np.array([[True, False, False, False]])
    row = compare_baseline(m, m, burn)
    assert row.model_recall == row.baseline_recall == 1.0
    assert row.model_false_alarm == row.baseline_false_alarm == pytest.approx(1 / 3)
    zero = compare_baseline(fmap(np.zeros((1, 4))), m, np.zeros((1, 4), bool))
    assert zero.model_false_alarm == 0.0 and zero.model_recall is None
    with pytest.raises(DataError, match="grid"):
        compare_baseline(m, fmap(np.zeros((2, 2))), burn)


def test_rescale_min_max():
    r = rescale(fmap([[10.0, 15.0, 20.0]]), 10.0, 20.0)
    np.testing.assert_allclose(r.values, [[0.0, 0.5, 1.0]])
    with pytest.raises(DataError):
        rescale(fmap([[1.0]]), 2.0, 2.0)


def test_no_fire_day_selection():
    burn = np.zeros((30, 3, 3), bool)
    burn[::2, 1, 1] = True
    days = select_no_fire_days(burn, range(30), 6, seed=4)
    assert days == sorted(days) and len(set(days)) == 6
    assert all(d % 2 == 1 for d in days)
    assert days == select_no_fire_days(burn, range(30), 6, seed=4)
    with pytest.raises(DataError):
        select_no_fire_days(burn, range(30), 20)


# ---------------------------------------------------------------- randomized oracles

def _random_map(r, shape=(9, 11)):
    mask = r.random(shape) < 0.8
    vals = r.random(shape)
    vals[r.random(shape) < 0.1] = 0.5  # exercise the threshold tie
    return FdiMap(np.where(mask, vals, 0).astype(np.float32), mask, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31))
def test_recall_and_false_alarms_match_counting_oracle(seed):
    r = np.random.default_rng(seed)
    m, b = _random_map(r), _random_map(r)
    b = FdiMap(b.values, m.mask, 0)
    burn = r.random(m.mask.shape) < 0.3
    fires = det = quiet = fa_m = fa_b = 0
    for y in range(burn.shape[0]):
        for x in range(burn.shape[1]):
            if not m.mask[y, x]:
                continue
            if burn[y, x]:
                fires += 1
                det += m.values[y, x] > 0.5
            else:
                quiet += 1
                fa_m += m.values[y, x] > 0.5
                fa_b += b.values[y, x] > 0.3
    rec = daily_recall(m, burn)
    assert (rec is None) == (fires == 0)
    if rec:
        assert rec.recall == det / fires
    row = compare_baseline(m, b, burn, (0.5, 0.3))
    assert row.model_false_alarm == (fa_m / quiet if quiet else None)
    assert row.baseline_false_alarm == (fa_b / quiet if quiet else None)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.integers(1, 100))
def test_quantile_matches_sort_and_index(recalls, level):
    n = len(recalls)
    rank = max(1, math.ceil(level * n / 100 - 1e-12))
    assert recall_quantiles(recalls, [level]).values[0] == sorted(recalls)[rank - 1]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_quantiles_non_decreasing(recalls):
    v = recall_quantiles(recalls).values
    assert all(a <= b for a, b in zip(v, v[1:]))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31))
def test_skewness_matches_moment_oracle(seed):
    r = np.random.default_rng(seed)
    m = _random_map(r)
    m.values[m.mask] = m.values[m.mask] ** r.uniform(0.3, 3.0)
    d = fdi_distribution(m)
    ref = skew(m.valid.astype(np.float64), bias=True)
    assert abs(d.skewness - ref) <= 1e-10
    # invariances: shift leaves it unchanged, reflection flips the sign
    v = m.valid.astype(np.float64)
    assert abs(skewness(v + 0.25) - d.skewness) <= 1e-9
    assert abs(skewness(1 - v) + d.skewness) <= 1e-9
    assert sum(d.counts) == d.n_valid


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_recall_invariant_under_monotone_transform_fixing_half(seed):
    r = np.random.default_rng(seed)
    m = _random_map(r)
    burn = r.random(m.mask.shape) < 0.4
    v = m.values.astype(np.float64)
    # sqrt pushes values away from 0.5, so float32 rounding cannot land on it
    t = 0.5 + np.sign(v - 0.5) * np.sqrt(np.abs(v - 0.5) / 2)
    a, b = daily_recall(m, burn), daily_recall(FdiMap(t.astype(np.float32), m.mask, 0), burn)
    assert (a is None and b is None) or a.recall == b.recall


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_consistency_matches_recomputation(seed):
    r = np.random.default_rng(seed)
    mask = r.random((8, 8)) < 0.8
    days, burn = [], {}
    for d in range(5):
        members = [FdiMap(np.where(mask, r.random((8, 8)), 0), mask, d) for _ in range(7)]
        days.append(members)
        burn[d] = r.random((8, 8)) < 0.2
    rows = ensemble_consistency(days, burn)
    for row in rows:
        ms = days[row.date]
        fire = burn[row.date] & mask
        lhs = np.mean([np.mean(m.values[fire] > 0.5) for m in ms])
        avg = np.mean([m.values.astype(np.float64) for m in ms], axis=0).astype(np.float32)
        rhs = np.mean(avg[fire] > 0.5)
        assert row.lhs == pytest.approx(lhs, abs=1e-12) and row.rhs == rhs
        assert row.gap == pytest.approx(abs(lhs - rhs), abs=1e-12)


# ---------------------------------------------------------------- report

def _report():
    r = np.random.default_rng(0)
    maps = [_random_map(r) for _ in range(3)]
    rep = EvalReport(member_ids=["a", "b"])
    rep.records = [DailyRecallRecord(d, 4, 3, 0.75) for d in (3, 5)]
    rep.quantiles = recall_quantiles(rep.records)
    rep.distributions = [fdi_distribution(FdiMap(m.values, m.mask, d)) for d, m in zip((7, 9), maps)]
    rep.member_recall = [[3, 0.5, None], [5, 1.0, 0.25]]
    rep.member_quantiles = [recall_quantiles([0.5, 1.0]), recall_quantiles([0.25])]
    rep.member_skewness = [[7, 0.1, 0.2], [9, -0.3, 0.4]]
    twin = FdiMap(maps[1].values, maps[0].mask, 0)
    rep.consistency = ensemble_consistency([[maps[0], twin]], {0: np.ones((9, 11), bool)})
    rep.baseline = [compare_baseline(maps[0], maps[1], np.zeros((9, 11), bool))]
    return rep


def test_report_roundtrip_and_files(tmp_path):
    rep = _report()
    files = write_report(rep, tmp_path)
    assert read_report(tmp_path) == rep
    assert len(read_csv(tmp_path / "quantiles.csv")) == 6
    assert read_csv(tmp_path / "daily_recall.csv")[0] == {"date": "3", "fires": "4", "detected": "3",
                                                          "recall": "0.75"}
    for name in ("daily_recall.csv", "quantiles.csv", "skewness.csv", "eq1.csv", "baseline.csv",
                 "summary.json", "member_recall.csv", "member_recall.svg"):
        assert name in files
    for svg in tmp_path.glob("*.svg"):
        assert ET.parse(svg).getroot().tag.endswith("svg")
    rep.save(tmp_path / "eval.json")
    assert EvalReport.load(tmp_path / "eval.json") == rep


def test_report_summary_counts():
    s = _report().summary()
    assert s["n_fire_days"] == 2 and s["n_no_fire_days"] == 2
    assert "eq1_mean_gap" in s and "ensemble_skew_ge_member_median_days" in s
