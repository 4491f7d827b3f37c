"""Stateless forward/backward kernels.

All kernels operate on batched NCHW (or NC) arrays.  Every per-sample
matrix product is issued as a stacked ``np.matmul`` whose per-item shape does
not depend on the batch size, so a sample's result is bitwise identical
whether it is evaluated alone or inside a batch.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _as_batch(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ValueError(f"expected a {ndim - 1}-d or {ndim}-d array, got shape {x.shape}")
    return x, False


def _im2col(xp: np.ndarray, k: int) -> np.ndarray:
    n, c, hp, wp = xp.shape
    ho, wo = hp - k + 1, wp - k + 1
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # n, c, ho, wo, k, k
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho * wo, c * k * k)


# ---------------------------------------------------------------- convolution

def conv2d(x, weight, bias, padding=0):
    """Cross-correlation of ``x`` (N,C,H,W or C,H,W) with ``weight`` (O,C,K,K).

    Returns ``(out, cache)``; ``cache`` feeds :func:`conv2d_backward`.
    """
    x, squeezed = _as_batch(np.asarray(x), 4)
    o, c, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"kernel must be square with odd extent, got {weight.shape[2:]}")
    if padding not in (0, (k - 1) // 2):
        raise ValueError(f"padding must be 0 or {(k - 1) // 2}, got {padding}")
    if x.shape[1] != c:
        raise ValueError(
            f"input has {x.shape[1]} channels but weights expect {c} "
            f"(input {x.shape}, weights {weight.shape})"
        )
    n, _, h, w = x.shape
    ho, wo = h + 2 * padding - k + 1, w + 2 * padding - k + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"input {h}x{w} too small for kernel {k} with padding {padding}")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _im2col(xp, k)
    w2 = weight.reshape(o, -1).T
    out = np.matmul(cols, w2)  # n, ho*wo, o
    out = out.transpose(0, 2, 1).reshape(n, o, ho, wo) + bias.reshape(1, o, 1, 1)
    cache = {"cols": cols, "x_shape": x.shape, "weight": weight, "padding": padding,
             "squeezed": squeezed}
    return (out[0] if squeezed else out), cache


def conv2d_backward(dout, cache, input_grad_from=0, need_input_grad=True):
    """Gradients of :func:`conv2d`.

    ``input_grad_from`` skips the input gradient for leading channels that do
    not need one (they come back as zeros).
    """
    if cache is None:
        raise RuntimeError("conv2d_backward called before a forward pass on this layer")
    weight = cache["weight"]
    o, c, k, _ = weight.shape
    n, _, h, w = cache["x_shape"]
    dout, _ = _as_batch(np.asarray(dout), 4)
    ho, wo = dout.shape[2], dout.shape[3]
    cols = cache["cols"]
    if dout.shape != (n, o, ho, wo) or cols.shape[1] != ho * wo:
        raise ValueError(f"upstream gradient shape {dout.shape} does not match the forward call")
    dy = dout.reshape(n, o, ho * wo).transpose(0, 2, 1)  # n, P, o
    dy2 = dy.reshape(n * ho * wo, o)
    dweight = (dy2.T @ cols.reshape(n * ho * wo, c * k * k)).reshape(weight.shape)
    dbias = dy2.sum(axis=0)
    dx = None
    if need_input_grad:
        pad = cache["padding"]
        c0 = input_grad_from
        wsub = weight[:, c0:].reshape(o, -1)
        dcols = np.matmul(dy, wsub).reshape(n, ho, wo, c - c0, k, k)
        dxp = np.zeros((n, c - c0, ho + k - 1, wo + k - 1), dtype=dout.dtype)
        for ki in range(k):
            for kj in range(k):
                dxp[:, :, ki:ki + ho, kj:kj + wo] += dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
        if pad:
            dxp = dxp[:, :, pad:pad + h, pad:pad + w]
        if c0:
            dx = np.zeros((n, c, h, w), dtype=dout.dtype)
            dx[:, c0:] = dxp
        else:
            dx = np.ascontiguousarray(dxp)
        if cache["squeezed"]:
            dx = dx[0]
    return dx, dweight, dbias


# ---------------------------------------------------------------- pooling

def maxpool2d(x):
    """2x2 max-pool with stride 2. Odd trailing rows/columns are dropped.

    Returns ``(out, argmax)`` where ``argmax`` indexes the row-major position
    inside each window (first occurrence wins ties).
    """
    x, squeezed = _as_batch(np.asarray(x), 4)
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ValueError(f"maxpool2d needs at least 2x2 input, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    win = x[:, :, : 2 * h2, : 2 * w2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h2, w2, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    if squeezed:
        return out[0], arg[0]
    return out, arg


def maxpool2d_backward(dout, argmax, in_shape):
    dout, squeezed = _as_batch(np.asarray(dout), 4)
    arg, _ = _as_batch(argmax, 4)
    n, c, h2, w2 = dout.shape
    h, w = in_shape[-2], in_shape[-1]
    dwin = np.zeros((n, c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
    dx = np.zeros((n, c, h, w), dtype=dout.dtype)
    dx[:, :, : 2 * h2, : 2 * w2] = dwin
    return dx[0] if squeezed else dx


# ---------------------------------------------------------------- batchnorm

def _bn_axes(x):
    if x.ndim == 2:
        return (0,), (1, -1)
    if x.ndim == 4:
        return (0, 2, 3), (1, -1, 1, 1)
    raise ValueError(f"batchnorm expects N,C or N,C,H,W input, got shape {x.shape}")


def batchnorm(x, gamma, beta, running_mean, running_var, training,
              eps=BN_EPS, momentum=BN_MOMENTUM):
    """Batch normalization over the batch (and spatial) axes.

    In training mode the running statistics are updated in place (unbiased
    variance, as in PyTorch) and the output uses the biased batch variance.
    """
    axes, bshape = _bn_axes(x)
    if training:
        if x.shape[0] < 2:
            raise ValueError("batchnorm in train mode needs a batch of at least 2")
        m = x.size // x.shape[1]
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
    out = gamma.reshape(bshape) * xhat + beta.reshape(bshape)
    cache = {"xhat": xhat, "inv_std": inv_std, "gamma": gamma, "training": training}
    return out, cache


def batchnorm_backward(dout, cache):
    axes, bshape = _bn_axes(dout)
    xhat, inv_std, gamma = cache["xhat"], cache["inv_std"], cache["gamma"]
    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * gamma.reshape(bshape)
    if cache["training"]:
        m = dout.size // dout.shape[1]
        dx = (inv_std.reshape(bshape) / m) * (
            m * dxhat
            - dxhat.sum(axis=axes).reshape(bshape)
            - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape)
        )
    else:
        dx = dxhat * inv_std.reshape(bshape)
    return dx, dgamma, dbeta


# ---------------------------------------------------------------- dense & friends

def dense(x, weight, bias):
    """Affine map ``x @ weight.T + bias`` with ``weight`` of shape (out, in)."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"dense input {x.shape} incompatible with weights {weight.shape}")
    out = np.matmul(x[:, None, :], weight.T)[:, 0, :] + bias
    return out


def dense_backward(dout, x, weight):
    dx = dout @ weight
    dweight = dout.T @ x
    dbias = dout.sum(axis=0)
    return dx, dweight, dbias


def relu(x):
    mask = x > 0
    return np.where(mask, x, 0).astype(x.dtype, copy=False), mask


def dropout(x, rate, training, rng=None):
    """Inverted dropout; identity in eval mode or at ``rate == 0``."""
    if not training or rate == 0:
        return x, None
    if rng is None:
        raise ValueError("dropout in train mode needs a random generator")
    keep = rng.random(x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    return x * keep * scale, keep * scale


def sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------- output head

def log_softmax(z):
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def log_softmax_backward(dlogp, logp):
    return dlogp - np.exp(logp) * dlogp.sum(axis=1, keepdims=True)


def nll_loss(logp, labels):
    """Mean negative log-likelihood and its gradient w.r.t. ``logp``."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logp.shape[0]:
        raise ValueError(f"labels shape {labels.shape} does not match predictions {logp.shape}")
    if np.any((labels != 0) & (labels != 1)):
        raise ValueError("labels must be 0 (fire) or 1 (no-fire)")
    n = logp.shape[0]
    idx = labels.astype(np.intp)
    loss = -logp[np.arange(n), idx].mean()
    dlogp = np.zeros_like(logp)
    dlogp[np.arange(n), idx] = -1.0 / n
    return float(loss), dlogp


def log_softmax_nll(logits, labels):
    """Loss and logit gradient ``(softmax - onehot) / N`` for two classes."""
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ValueError(f"expected N x 2 logits, got {logits.shape}")
    logp = log_softmax(logits)
    loss, _ = nll_loss(logp, labels)
    grad = np.exp(logp)
    grad[np.arange(logits.shape[0]), np.asarray(labels).astype(np.intp)] -= 1.0
    return loss, grad / logits.shape[0]


# ---------------------------------------------------------------- ConvLSTM

def convlstm_cell_step(x, h, c, weight, bias, padding=None):
    """One ConvLSTM step.

    Gates are a convolution over the channel concatenation ``[x, h]`` with
    ``weight`` of shape (4F, C+F, K, K), split in the order input, forget,
    output, candidate.  Returns ``(h_next, c_next, cache)``.
    """
    x, squeezed = _as_batch(np.asarray(x), 4)
    h, _ = _as_batch(np.asarray(h), 4)
    c, _ = _as_batch(np.asarray(c), 4)
    f4, cf, k, _ = weight.shape
    nf = f4 // 4
    cin = cf - nf
    if h.shape[2:] != x.shape[2:] or c.shape != h.shape:
        raise ValueError(
            f"spatial dimensions drifted between steps: input {x.shape[2:]}, "
            f"hidden {h.shape[2:]}, cell {c.shape[2:]}"
        )
    if h.shape[1] != nf or x.shape[1] != cin:
        raise ValueError(f"state/input channels {x.shape[1]}+{h.shape[1]} do not match weights {weight.shape}")
    pad = (k - 1) // 2 if padding is None else padding
    if pad != (k - 1) // 2:
        raise ValueError("ConvLSTM convolutions must use same padding")
    zx, cache_x = conv2d(x, weight[:, :cin], bias, pad)
    zero_bias = np.zeros_like(bias)
    zh, cache_h = conv2d(h, weight[:, cin:], zero_bias, pad)
    z = zx + zh
    i = sigmoid(z[:, :nf])
    f = sigmoid(z[:, nf:2 * nf])
    o = sigmoid(z[:, 2 * nf:3 * nf])
    g = np.tanh(z[:, 3 * nf:])
    c_next = f * c + i * g
    tc = np.tanh(c_next)
    h_next = o * tc
    cache = {"cache_x": cache_x, "cache_h": cache_h, "i": i, "f": f, "o": o, "g": g,
             "c": c, "tc": tc, "cin": cin, "squeezed": squeezed}
    if squeezed:
        return h_next[0], c_next[0], cache
    return h_next, c_next, cache


def convlstm_cell_step_backward(dh_next, dc_next, cache, input_grad_from=0, need_input_grad=True):
    """Backward of one step: returns ``(dx, dh, dc, dweight, dbias)``."""
    i, f, o, g, tc = cache["i"], cache["f"], cache["o"], cache["g"], cache["tc"]
    dh_next, _ = _as_batch(np.asarray(dh_next), 4)
    dc_next, _ = _as_batch(np.asarray(dc_next), 4)
    do = dh_next * tc
    dc = dc_next + dh_next * o * (1 - tc * tc)
    di = dc * g
    df = dc * cache["c"]
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1
    )
    dx, dwx, dbias = conv2d_backward(dz, cache["cache_x"], input_grad_from, need_input_grad)
    dh, dwh, _ = conv2d_backward(dz, cache["cache_h"])
    dweight = np.concatenate([dwx, dwh], axis=1)
    if cache["squeezed"]:
        dh, dc_prev = dh[0], dc_prev[0]
        dx = dx[0] if dx is not None else None
    return dx, dh, dc_prev, dweight, dbias
