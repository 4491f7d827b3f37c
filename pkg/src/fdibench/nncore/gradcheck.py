"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    n_skipped: int
    worst: str = ""


def grad_check(loss_fn, params, grads, n_samples=1000, step=1e-4, seed=0, floor=1e-6,
               signature_fn=None):
    """Compare ``grads`` against central differences of ``loss_fn``.

    ``loss_fn()`` re-evaluates the loss with the current (mutated in place)
    ``params``.  Coordinates are sampled uniformly over all parameters.  When
    ``signature_fn`` is given, coordinates whose +/- perturbation flips a
    ReLU or max-pool decision are skipped, since the loss is not
    differentiable across that kink.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    paths = list(params)
    sizes = np.array([params[p].size for p in paths])
    total = int(sizes.sum())
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    order = rng.permutation(total)
    base_sig = signature_fn() if signature_fn else None

    worst, worst_at, checked, skipped = 0.0, "", 0, 0
    for flat in order:
        if checked >= n_samples:
            break
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        path, idx = paths[k], int(flat - offsets[k])
        arr = params[path].reshape(-1)
        orig = arr[idx]
        arr[idx] = orig + step
        f_plus = loss_fn()
        sig_plus = signature_fn() if signature_fn else None
        arr[idx] = orig - step
        f_minus = loss_fn()
        sig_minus = signature_fn() if signature_fn else None
        arr[idx] = orig
        if signature_fn and (sig_plus != base_sig or sig_minus != base_sig):
            skipped += 1
            continue
        num = (f_plus - f_minus) / (2 * step)
        ana = float(grads[path].reshape(-1)[idx])
        rel = abs(ana - num) / max(abs(ana), abs(num), floor)
        if rel > worst:
            worst, worst_at = rel, f"{path}[{idx}] analytic={ana:.6g} numeric={num:.6g}"
        checked += 1
    if signature_fn:
        loss_fn()  # restore caches at the unperturbed point
    return GradCheckResult(worst, checked, skipped, worst_at)


def check_layer(layer, x, training=True, n_samples=1000, seed=0, check_input=True):
    """Finite-difference check of one layer with loss ``sum(out * R)``.

    The layer is converted to float64 first.  Returns the worst relative
    error over parameters and (optionally) the input.
    """
    layer.astype(np.float64)
    x = np.array(x)
    if x.dtype.kind == "f":
        x = x.astype(np.float64)
    else:
        check_input = False
    rng = np.random.default_rng(seed + 1)
    out = layer.forward(x, training=training)
    proj = rng.standard_normal(out.shape)

    def loss():
        return float((layer.forward(x, training=training) * proj).sum())

    layer.zero_grad()
    layer.forward(x, training=training)
    dx = layer.backward(proj)
    analytic = dict(layer.grads)
    targets = dict(layer.params)
    if check_input and dx is not None:
        targets["input"] = x
        analytic["input"] = dx
    return grad_check(loss, targets, analytic, n_samples=n_samples, seed=seed,
                      signature_fn=layer.signature)


def check_model(model, inputs, labels, n_samples=1000, seed=0, training=False):
    """End-to-end check of a model's NLL loss w.r.t. all learnable parameters.

    The caller is expected to have switched the model to float64 and
    disabled dropout; ``training=True`` uses batch statistics in batchnorm.
    """
    def loss():
        logp = model.forward(*inputs, training=training)
        return F.nll_loss(logp, labels)[0]

    model.zero_grad()
    logp = model.forward(*inputs, training=training)
    _, dlogp = F.nll_loss(logp, labels)
    model.backward(dlogp)
    grads = {k: v.copy() for k, v in model.grads.items()}
    return grad_check(loss, model.params, grads, n_samples=n_samples, seed=seed,
                      signature_fn=model.signature)
