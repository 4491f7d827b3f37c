"""Layer objects: parameters, gradients, buffers and the activation cache.

A layer only caches activations when ``forward`` is called with
``store=True``.  Inference passes ``store=False`` so that one instance can be
shared by concurrent callers.
"""

from __future__ import annotations

import numpy as np

from . import functional as F


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def _need_cache(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}: backward called before forward")
        return self._cache

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def astype(self, dtype):
        for d in (self.params, self.buffers):
            for k in d:
                d[k] = d[k].astype(dtype)
        self.zero_grad()

    def signature(self):
        """Bytes describing the non-differentiable decisions of the last forward."""
        return b""


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_ch, out_ch, kernel=3, padding=1, input_grad_from=0, need_input_grad=True):
        super().__init__()
        self.padding = padding
        self.input_grad_from = input_grad_from
        self.need_input_grad = need_input_grad
        self.params["weight"] = np.zeros((out_ch, in_ch, kernel, kernel), np.float32)
        self.params["bias"] = np.zeros(out_ch, np.float32)
        self.zero_grad()

    def init(self, rng):
        w = self.params["weight"]
        fan_in = w[0].size
        self.params["weight"] = rng.uniform(-1, 1, w.shape).astype(w.dtype) * np.sqrt(6.0 / fan_in).astype(w.dtype)
        self.params["bias"] = (rng.uniform(-1, 1, w.shape[0]) / np.sqrt(fan_in)).astype(w.dtype)

    def forward(self, x, training=False, store=True):
        out, cache = F.conv2d(x, self.params["weight"], self.params["bias"], self.padding)
        self._cache = cache if store else None
        return out

    def backward(self, dout):
        dx, dw, db = F.conv2d_backward(dout, self._need_cache(), self.input_grad_from,
                                       self.need_input_grad)
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class BatchNorm(Layer):
    kind = "batchnorm"

    def __init__(self, num_features):
        super().__init__()
        self.params["gamma"] = np.ones(num_features, np.float32)
        self.params["beta"] = np.zeros(num_features, np.float32)
        self.buffers["running_mean"] = np.zeros(num_features, np.float32)
        self.buffers["running_var"] = np.ones(num_features, np.float32)
        self.zero_grad()

    def init(self, rng):
        self.params["gamma"][:] = 1
        self.params["beta"][:] = 0

    def forward(self, x, training=False, store=True):
        out, cache = F.batchnorm(x, self.params["gamma"], self.params["beta"],
                                 self.buffers["running_mean"], self.buffers["running_var"],
                                 training)
        self._cache = cache if store else None
        return out

    def backward(self, dout):
        dx, dg, db = F.batchnorm_backward(dout, self._need_cache())
        self.grads["gamma"] += dg
        self.grads["beta"] += db
        return dx


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out):
        super().__init__()
        self.params["weight"] = np.zeros((n_out, n_in), np.float32)
        self.params["bias"] = np.zeros(n_out, np.float32)
        self.zero_grad()

    def init(self, rng):
        w = self.params["weight"]
        fan_in = w.shape[1]
        self.params["weight"] = (rng.uniform(-1, 1, w.shape) * np.sqrt(6.0 / fan_in)).astype(w.dtype)
        self.params["bias"] = (rng.uniform(-1, 1, w.shape[0]) / np.sqrt(fan_in)).astype(w.dtype)

    def forward(self, x, training=False, store=True):
        self._cache = x if store else None
        return F.dense(x, self.params["weight"], self.params["bias"])

    def backward(self, dout):
        dx, dw, db = F.dense_backward(dout, self._need_cache(), self.params["weight"])
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False, store=True):
        out, mask = F.relu(x)
        self._cache = mask if store else None
        return out

    def backward(self, dout):
        return dout * self._need_cache()

    def signature(self):
        return np.packbits(self._cache).tobytes() if self._cache is not None else b""


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate=0.5):
        super().__init__()
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = None

    def forward(self, x, training=False, store=True):
        out, scale = F.dropout(x, self.rate, training, self.rng)
        self._cache = ("mask", scale) if store else None
        return out

    def backward(self, dout):
        _, scale = self._need_cache()
        return dout if scale is None else dout * scale


class MaxPool2d(Layer):
    kind = "maxpool"

    def forward(self, x, training=False, store=True):
        out, arg = F.maxpool2d(x)
        self._cache = (arg, x.shape) if store else None
        return out

    def backward(self, dout):
        arg, shape = self._need_cache()
        return F.maxpool2d_backward(dout, arg, shape)

    def signature(self):
        return self._cache[0].astype(np.uint8).tobytes() if self._cache is not None else b""


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training=False, store=True):
        self._cache = x.shape if store else None
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._need_cache())


class LogSoftmax(Layer):
    kind = "logsoftmax"

    def forward(self, x, training=False, store=True):
        out = F.log_softmax(x)
        self._cache = out if store else None
        return out

    def backward(self, dout):
        return F.log_softmax_backward(dout, self._need_cache())


class Embedding(Layer):
    """Lookup table mapping integer classes to ``dim`` channels.

    Input (N, ..., H, W) integers; output (N, ..., dim, H, W).
    """

    kind = "embedding"

    def __init__(self, n_classes, dim):
        super().__init__()
        self.params["table"] = np.zeros((n_classes, dim), np.float32)
        self.zero_grad()

    def init(self, rng):
        t = self.params["table"]
        self.params["table"] = rng.uniform(-0.1, 0.1, t.shape).astype(t.dtype)

    def forward(self, idx, training=False, store=True):
        table = self.params["table"]
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
            raise ValueError(
                f"land-cover class out of range [0, {table.shape[0]}): "
                f"found {idx.min()}..{idx.max()}"
            )
        self._cache = idx if store else None
        out = table[idx]  # ..., H, W, dim
        return np.moveaxis(out, -1, -3)

    def backward(self, dout):
        idx = self._need_cache()
        table = self.params["table"]
        g = np.moveaxis(dout, -3, -1).reshape(-1, table.shape[1])
        flat = idx.reshape(-1)
        for d in range(table.shape[1]):
            self.grads["table"][:, d] += np.bincount(flat, weights=g[:, d], minlength=table.shape[0])
        return None


class ConvLSTM(Layer):
    """Single ConvLSTM cell unrolled over a sequence; returns the last hidden state."""

    kind = "convlstm_cell"

    def __init__(self, in_ch, hidden, kernel=3, input_grad_from=0):
        super().__init__()
        self.hidden = hidden
        self.in_ch = in_ch
        self.input_grad_from = input_grad_from
        self.params["weight"] = np.zeros((4 * hidden, in_ch + hidden, kernel, kernel), np.float32)
        self.params["bias"] = np.zeros(4 * hidden, np.float32)
        self.zero_grad()

    def init(self, rng):
        w = self.params["weight"]
        fan_in = w[0].size
        bound = 1.0 / np.sqrt(fan_in)
        self.params["weight"] = (rng.uniform(-1, 1, w.shape) * bound).astype(w.dtype)
        self.params["bias"] = (rng.uniform(-1, 1, w.shape[0]) * bound).astype(w.dtype)

    def forward(self, seq, training=False, store=True):
        n, t, _, hh, ww = seq.shape
        dtype = self.params["weight"].dtype
        h = np.zeros((n, self.hidden, hh, ww), dtype)
        c = np.zeros_like(h)
        caches = []
        for step in range(t):
            h, c, cache = F.convlstm_cell_step(seq[:, step], h, c, self.params["weight"],
                                               self.params["bias"])
            if store:
                caches.append(cache)
        self._cache = (caches, seq.shape) if store else None
        return h

    def backward(self, dh):
        caches, shape = self._need_cache()
        dc = np.zeros_like(dh)
        dseq = np.zeros(shape, dh.dtype) if self.input_grad_from < shape[2] else None
        for step in range(len(caches) - 1, -1, -1):
            dx, dh, dc, dw, db = F.convlstm_cell_step_backward(
                dh, dc, caches[step], self.input_grad_from, dseq is not None)
            self.grads["weight"] += dw
            self.grads["bias"] += db
            if dseq is not None:
                dseq[:, step] = dx
        return dseq
