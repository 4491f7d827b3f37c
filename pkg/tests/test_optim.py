import numpy as np
import pytest

from fdibench.nncore import AdamState, PlateauSchedulerState, adam_step, plateau_update


def test_first_adam_step_moves_by_lr():
    # after bias correction the first step is lr * g / (|g| + eps)
    p = {"w": np.array([1.0, -2.0, 0.5])}
    g = {"w": np.array([0.3, -4.0, 1e-3])}
    st = AdamState(lr=0.01)
    adam_step(p, g, st)
    np.testing.assert_allclose(p["w"], [0.99, -1.99, 0.49], rtol=1e-6)
    assert st.step == 1


def test_adam_matches_reference_recursion(rng):
    w = rng.standard_normal(4)
    p = {"w": w.copy()}
    st = AdamState(lr=1e-2)
    m = v = np.zeros(4)
    for t in range(1, 6):
        g = rng.standard_normal(4)
        adam_step(p, {"w": g}, st)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p["w"], w, rtol=1e-12)


def test_adam_rejects_non_finite_without_side_effects():
    p = {"a": np.ones(2), "b": np.ones(2)}
    st = AdamState()
    with pytest.raises(FloatingPointError, match="'b'"):
        adam_step(p, {"a": np.ones(2), "b": np.array([1.0, np.nan])}, st)
    assert st.step == 0 and not st.m
    np.testing.assert_array_equal(p["a"], 1.0)


def test_plateau_reduces_after_patience():
    st = PlateauSchedulerState(lr=1e-3, patience=2, factor=0.1)
    lrs = [plateau_update(st, v) for v in [1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]]
    # improvement at 0.9, then bad epochs 1, 2, 3 -> reduce at the third
    assert lrs == pytest.approx([1e-3, 1e-3, 1e-3, 1e-3, 1e-4, 1e-4, 1e-4, 1e-5])


def test_plateau_relative_threshold_and_floor():
    st = PlateauSchedulerState(lr=1e-5, patience=0, factor=0.1, min_lr=1e-6)
    plateau_update(st, 1.0)
    # 1.0 - 5e-5 is not a 1e-4 relative improvement
    assert plateau_update(st, 1.0 - 5e-5) == pytest.approx(1e-6)
    assert plateau_update(st, 1.0) == pytest.approx(1e-6)


def test_plateau_validates_factor():
    with pytest.raises(ValueError):
        PlateauSchedulerState(factor=1.5)
