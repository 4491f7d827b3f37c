"""The four patch classifiers and their parameter accounting."""

from __future__ import annotations

import copy
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import UsageError
from ..nncore import (
    BatchNorm,
    Conv2d,
    ConvLSTM,
    Dense,
    Dropout,
    Embedding,
    Flatten,
    LogSoftmax,
    MaxPool2d,
    ReLU,
)

log = logging.getLogger(__name__)

ARCHITECTURES = ("BasicCNN", "DeeperCNN1", "DeeperCNN2", "ConvLSTM")
PAPER_BUDGETS = {"BasicCNN": 40_600, "DeeperCNN1": 66_500, "DeeperCNN2": 111_000, "ConvLSTM": 371_000}
_CONV_BLOCKS = {"BasicCNN": 1, "DeeperCNN1": 3, "DeeperCNN2": 4, "ConvLSTM": 1}
_CLASSIFIER = {"BasicCNN": (16, 16), "DeeperCNN1": (64, 32), "DeeperCNN2": (64, 16), "ConvLSTM": (32, 32)}


@dataclass
class ModelConfig:
    arch: str = "BasicCNN"
    conv_width: int = 16
    classifier_widths: tuple = (16, 16)
    dropout: float = 0.5
    lstm_hidden: int = 64
    head_conv_width: int = 32
    embed_dim: int = 10
    n_continuous: int = 14
    n_clc_classes: int = 15
    patch_size: int = 25
    temporal_len: int = 1
    kernel: int = 3
    padding: str = "same"
    init_seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise UsageError(f"unknown architecture {self.arch!r}; expected one of {ARCHITECTURES}")
        if self.padding not in ("same", "valid"):
            raise UsageError(f"padding must be 'same' or 'valid', got {self.padding!r}")
        self.classifier_widths = tuple(int(v) for v in self.classifier_widths)
        if len(self.classifier_widths) != 2:
            raise UsageError("classifier_widths must hold the two hidden widths")
        if self.arch == "ConvLSTM" and self.temporal_len < 2:
            raise UsageError("ConvLSTM needs a temporal length > 1")
        if self.arch != "ConvLSTM" and self.temporal_len != 1:
            raise UsageError(f"{self.arch} takes single-day samples (temporal_len 1)")

    @property
    def in_channels(self):
        return self.n_continuous + self.embed_dim

    @property
    def conv_blocks(self):
        return _CONV_BLOCKS[self.arch]

    def to_dict(self):
        d = asdict(self)
        d["classifier_widths"] = list(self.classifier_widths)
        return d


def default_config(arch: str, **overrides) -> ModelConfig:
    base = {"arch": arch, "classifier_widths": _CLASSIFIER.get(arch, (16, 16)),
            "temporal_len": 10 if arch == "ConvLSTM" else 1}
    base.update(overrides)
    return ModelConfig(**base)


def _layout(config: ModelConfig):
    """Ordered ``(name, layer)`` list, excluding embedding/ConvLSTM front end."""
    pad = (config.kernel - 1) // 2 if config.padding == "same" else 0
    layers = []
    size = config.patch_size
    if config.arch == "ConvLSTM":
        chans = [config.lstm_hidden, config.head_conv_width]
    else:
        chans = [config.in_channels] + [config.conv_width * 2 ** b for b in range(config.conv_blocks)]
    for b in range(len(chans) - 1):
        first = b == 0 and config.arch != "ConvLSTM"
        layers.append((f"conv{b}", Conv2d(chans[b], chans[b + 1], config.kernel, pad,
                                          input_grad_from=config.n_continuous if first else 0)))
        layers.append((f"bn{b}", BatchNorm(chans[b + 1])))
        layers.append((f"relu{b}", ReLU()))
        layers.append((f"pool{b}", MaxPool2d()))
        size = (size + 2 * pad - config.kernel + 1) // 2
        if size < 1:
            raise UsageError(f"{config.arch}: patch of {config.patch_size} px collapses after block {b}")
    layers.append(("flatten", Flatten()))
    widths = [chans[-1] * size * size] + list(config.classifier_widths)
    for i in range(2):
        layers.append((f"fc{i}", Dense(widths[i], widths[i + 1])))
        layers.append((f"fcbn{i}", BatchNorm(widths[i + 1])))
        layers.append((f"fcrelu{i}", ReLU()))
        layers.append((f"drop{i}", Dropout(config.dropout)))
    layers.append(("fc2", Dense(widths[-1], 2)))
    layers.append(("logsoftmax", LogSoftmax()))
    return layers


class ModelBundle:
    """A built network: config, parameters, buffers and training provenance."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.provenance = {"init_seed": config.init_seed}
        self.embedding = Embedding(config.n_clc_classes, config.embed_dim)
        self.lstm = (ConvLSTM(config.in_channels, config.lstm_hidden, config.kernel,
                              input_grad_from=config.n_continuous)
                     if config.arch == "ConvLSTM" else None)
        self.layers = _layout(config)

    # -- structure
    def named_layers(self):
        yield "embedding", self.embedding
        if self.lstm is not None:
            yield "convlstm", self.lstm
        yield from self.layers

    @property
    def params(self) -> dict:
        return {f"{n}.{k}": v for n, l in self.named_layers() for k, v in l.params.items()}

    @property
    def grads(self) -> dict:
        return {f"{n}.{k}": v for n, l in self.named_layers() for k, v in l.grads.items()}

    @property
    def buffers(self) -> dict:
        return {f"{n}.{k}": v for n, l in self.named_layers() for k, v in l.buffers.items()}

    def state_arrays(self) -> dict:
        """Parameters followed by buffers, in a fixed order."""
        out = self.params
        out.update(self.buffers)
        return out

    def load_state_arrays(self, arrays: dict):
        for n, layer in self.named_layers():
            for d in (layer.params, layer.buffers):
                for k in d:
                    src = arrays[f"{n}.{k}"]
                    if src.shape != d[k].shape:
                        raise ValueError(f"{n}.{k}: shape {src.shape} != expected {d[k].shape}")
                    d[k] = np.array(src, dtype=d[k].dtype)
            layer.zero_grad()

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def init(self, seed=None):
        rng = np.random.default_rng(self.config.init_seed if seed is None else seed)
        for _, layer in self.named_layers():
            if hasattr(layer, "init"):
                layer.init(rng)
            layer.zero_grad()

    def zero_grad(self):
        for _, layer in self.named_layers():
            layer.zero_grad()

    def astype(self, dtype):
        for _, layer in self.named_layers():
            layer.astype(dtype)
        return self

    @property
    def dtype(self):
        return self.embedding.params["table"].dtype

    def set_dropout(self, rate=None, rng=None):
        for _, layer in self.layers:
            if isinstance(layer, Dropout):
                if rate is not None:
                    layer.rate = rate
                layer.rng = rng

    def copy(self) -> "ModelBundle":
        return copy.deepcopy(self)

    def signature(self) -> bytes:
        return b"".join(layer.signature() for _, layer in self.named_layers())

    # -- computation
    def forward(self, x, clc, training=False, store=True):
        """Log-probabilities (N, 2); column 0 is the fire class."""
        cfg = self.config
        x = np.asarray(x, dtype=self.dtype)
        lead = 2 if self.lstm is not None else 1
        if x.ndim != lead + 3 or x.shape[lead:] != (cfg.n_continuous, cfg.patch_size, cfg.patch_size):
            want = ("N, T, " if self.lstm is not None else "N, ") + f"{cfg.n_continuous}, {cfg.patch_size}, {cfg.patch_size}"
            raise ValueError(f"{cfg.arch} expects input ({want}), got {x.shape}")
        if np.shape(clc) != x.shape[:lead] + x.shape[lead + 1:]:
            raise ValueError(f"land-cover plane shape {np.shape(clc)} does not match input {x.shape}")
        emb = self.embedding.forward(clc, training, store)
        h = np.concatenate([x, emb], axis=-3)
        if self.lstm is not None:
            h = self.lstm.forward(h, training, store)
        for _, layer in self.layers:
            h = layer.forward(h, training, store)
        return h

    def backward(self, dlogp):
        g = dlogp
        for _, layer in reversed(self.layers):
            g = layer.backward(g)
        if self.lstm is not None:
            g = self.lstm.backward(g)
        self.embedding.backward(g[..., self.config.n_continuous:, :, :])

    def predict_fdi(self, x, clc):
        """Eval-mode fire probability exp(log p_fire); no activations are cached."""
        return np.exp(self.forward(x, clc, training=False, store=False)[:, 0])


def build_model(config: ModelConfig) -> ModelBundle:
    """Initialized bundle; budget deviations beyond 25% produce a warning."""
    bundle = ModelBundle(config)
    bundle.init()
    report = budget_report(config)
    if report["budget"] and abs(report["deviation"]) > 0.25:
        warnings.warn(
            f"{config.arch}: {report['count']} parameters deviates {report['deviation']:+.1%} "
            f"from the {report['budget']} budget", stacklevel=2)
    return bundle


def _layer_count(layer) -> int:
    return sum(int(np.prod(v.shape)) for v in layer.params.values())


def count_params(config: ModelConfig) -> int:
    """Closed-form learnable-parameter count from layer shapes."""
    k2 = config.kernel * config.kernel
    total = config.n_clc_classes * config.embed_dim
    pad = (config.kernel - 1) // 2 if config.padding == "same" else 0
    size = config.patch_size
    if config.arch == "ConvLSTM":
        f = config.lstm_hidden
        total += 4 * f * (config.in_channels + f) * k2 + 4 * f
        chans = [f, config.head_conv_width]
    else:
        chans = [config.in_channels] + [config.conv_width * 2 ** b for b in range(config.conv_blocks)]
    for b in range(len(chans) - 1):
        total += chans[b] * chans[b + 1] * k2 + chans[b + 1]  # conv
        total += 2 * chans[b + 1]  # batchnorm
        size = (size + 2 * pad - config.kernel + 1) // 2
    widths = [chans[-1] * size * size] + list(config.classifier_widths)
    for i in range(2):
        total += widths[i] * widths[i + 1] + widths[i + 1] + 2 * widths[i + 1]
    total += widths[-1] * 2 + 2
    return total


def budget_report(config: ModelConfig) -> dict:
    count = count_params(config)
    budget = PAPER_BUDGETS.get(config.arch)
    return {
        "arch": config.arch,
        "count": count,
        "budget": budget,
        "deviation": (count - budget) / budget if budget else 0.0,
        "conv_width": config.conv_width,
        "conv_blocks": config.conv_blocks,
        "classifier_widths": list(config.classifier_widths),
        "lstm_hidden": config.lstm_hidden if config.arch == "ConvLSTM" else None,
        "head_conv_width": config.head_conv_width if config.arch == "ConvLSTM" else None,
        "padding": config.padding,
    }


def with_seed(config: ModelConfig, seed: int) -> ModelConfig:
    return replace(config, init_seed=seed)
