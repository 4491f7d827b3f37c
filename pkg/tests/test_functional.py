import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdibench.nncore import functional as F


def naive_conv(x, w, b, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = h + 2 * pad - k + 1, wd + 2 * pad - k + 1
    out = np.zeros((n, o, ho, wo))
    for a in range(n):
        for f in range(o):
            for i in range(ho):
                for j in range(wo):
                    out[a, f, i, j] = np.sum(xp[a, :, i:i + k, j:j + k] * w[f]) + b[f]
    return out


def naive_pool(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for i in range(h // 2):
        for j in range(w // 2):
            out[:, :, i, j] = x[:, :, 2 * i:2 * i + 2, 2 * j:2 * j + 2].max(axis=(2, 3))
    return out


@pytest.mark.parametrize("pad", [0, 1])
def test_conv_matches_loop(rng, pad):
    x = rng.standard_normal((2, 3, 6, 5))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    out, _ = F.conv2d(x, w, b, pad)
    np.testing.assert_allclose(out, naive_conv(x, w, b, pad), rtol=1e-12, atol=1e-12)


def test_conv_unbatched_input(rng):
    x = rng.standard_normal((3, 5, 5))
    w = rng.standard_normal((2, 3, 3, 3))
    out, _ = F.conv2d(x, w, np.zeros(2), 1)
    assert out.shape == (2, 5, 5)


def test_conv_shape_errors(rng):
    w = rng.standard_normal((2, 3, 3, 3))
    with pytest.raises(ValueError, match="channels"):
        F.conv2d(rng.standard_normal((1, 4, 5, 5)), w, np.zeros(2), 1)
    with pytest.raises(ValueError, match="padding"):
        F.conv2d(rng.standard_normal((1, 3, 5, 5)), w, np.zeros(2), 2)
    with pytest.raises(ValueError, match="too small"):
        F.conv2d(rng.standard_normal((1, 3, 2, 2)), w, np.zeros(2), 0)


def test_conv_backward_before_forward():
    with pytest.raises(RuntimeError):
        F.conv2d_backward(np.zeros((1, 1, 1, 1)), None)


def test_conv_input_grad_from_skips_leading_channels(rng):
    x = rng.standard_normal((2, 5, 4, 4))
    w = rng.standard_normal((3, 5, 3, 3))
    out, cache = F.conv2d(x, w, np.zeros(3), 1)
    dy = rng.standard_normal(out.shape)
    full, dw, _ = F.conv2d_backward(dy, cache)
    part, dw2, _ = F.conv2d_backward(dy, cache, input_grad_from=2)
    np.testing.assert_array_equal(dw, dw2)
    np.testing.assert_allclose(part[:, 2:], full[:, 2:], rtol=1e-12)
    assert not part[:, :2].any()


def test_maxpool_matches_loop_and_first_tie(rng):
    x = rng.standard_normal((2, 3, 6, 7))
    out, arg = F.maxpool2d(x)
    np.testing.assert_array_equal(out, naive_pool(x[:, :, :6, :6]))
    tie = np.ones((1, 1, 2, 2))
    _, a = F.maxpool2d(tie)
    g = F.maxpool2d_backward(np.ones((1, 1, 1, 1)), a, tie.shape)
    np.testing.assert_array_equal(g[0, 0], [[1, 0], [0, 0]])


def test_batchnorm_train_statistics(rng):
    x = rng.standard_normal((8, 3, 4, 4)) * 2 + 1
    rm, rv = np.zeros(3), np.ones(3)
    out, _ = F.batchnorm(x, np.ones(3), np.zeros(3), rm, rv, training=True)
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1, rtol=1e-4)
    m = 8 * 16
    np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * m / (m - 1))


def test_batchnorm_rejects_single_sample_in_training():
    with pytest.raises(ValueError):
        F.batchnorm(np.ones((1, 2)), np.ones(2), np.zeros(2), np.zeros(2), np.ones(2), training=True)


def test_dropout_modes(rng):
    x = np.ones((1000,))
    same, _ = F.dropout(x, 0.5, training=False)
    assert same is x
    out, mask = F.dropout(x, 0.5, training=True, rng=rng)
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert abs(out.mean() - 1.0) < 0.1
    np.testing.assert_array_equal(out, x * mask)
    with pytest.raises(ValueError):
        F.dropout(x, 0.5, training=True)


def test_sigmoid_extremes():
    s = F.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_array_equal(s, [0.0, 0.5, 1.0])


def test_log_softmax_nll_example():
    logp = F.log_softmax(np.array([[0.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_allclose(np.exp(logp).sum(axis=1), 1.0)
    loss, g = F.nll_loss(logp, np.array([0, 1]))
    assert loss == pytest.approx(-(np.log(0.5) + logp[1, 1]) / 2)
    np.testing.assert_array_equal(g, [[-0.5, 0], [0, -0.5]])
    with pytest.raises(ValueError):
        F.nll_loss(logp, np.array([0, 2]))


def test_log_softmax_large_logits_stable():
    logp = F.log_softmax(np.array([[1000.0, -1000.0]]))
    assert np.all(np.isfinite(logp))


def test_fused_loss_gradient_matches_chain(rng):
    z = rng.standard_normal((5, 2))
    y = np.array([0, 1, 1, 0, 1])
    loss, g = F.log_softmax_nll(z, y)
    logp = F.log_softmax(z)
    loss2, dlogp = F.nll_loss(logp, y)
    assert loss == pytest.approx(loss2)
    np.testing.assert_allclose(g, F.log_softmax_backward(dlogp, logp), atol=1e-15)


def test_convlstm_step_matches_gate_equations(rng):
    cin, nf = 3, 2
    x = rng.standard_normal((2, cin, 5, 5))
    h = rng.standard_normal((2, nf, 5, 5))
    c = rng.standard_normal((2, nf, 5, 5))
    w = rng.standard_normal((4 * nf, cin + nf, 3, 3)) * 0.3
    b = rng.standard_normal(4 * nf)
    h1, c1, _ = F.convlstm_cell_step(x, h, c, w, b)
    z = naive_conv(np.concatenate([x, h], axis=1), w, b, 1)
    sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
    i, f, o, g = sig(z[:, :2]), sig(z[:, 2:4]), sig(z[:, 4:6]), np.tanh(z[:, 6:])
    c_ref = f * c + i * g
    np.testing.assert_allclose(c1, c_ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(h1, o * np.tanh(c_ref), rtol=1e-10, atol=1e-12)


def test_convlstm_rejects_spatial_drift(rng):
    w = np.zeros((8, 5, 3, 3))
    with pytest.raises(ValueError, match="drifted"):
        F.convlstm_cell_step(np.zeros((1, 3, 5, 5)), np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 4, 4)), w, np.zeros(8))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 9), split=st.integers(0, 9), seed=st.integers(0, 2**31))
def test_conv_and_dense_are_batch_invariant(n, split, seed):
    # one sample's output must not depend on what else is in the batch
    r = np.random.default_rng(seed)
    x = r.standard_normal((n + split, 6, 7, 7)).astype(np.float32)
    w = r.standard_normal((5, 6, 3, 3)).astype(np.float32)
    b = r.standard_normal(5).astype(np.float32)
    full, _ = F.conv2d(x, w, b, 1)
    alone, _ = F.conv2d(x[-1:], w, b, 1)
    np.testing.assert_array_equal(full[-1:], alone)
    wd = r.standard_normal((4, 245)).astype(np.float32)
    flat = full.reshape(len(x), -1)
    np.testing.assert_array_equal(F.dense(flat, wd, b[:4])[-1:], F.dense(flat[-1:], wd, b[:4]))
