"""Training loop, validation metrics and ensemble orchestration."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericError, UsageError
from .models import ModelBundle, ModelConfig, build_model, with_seed
from .nncore import AdamState, PlateauSchedulerState, adam_step, nll_loss, plateau_update
from .sampling import FIRE, PatchDataset

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "recall", "precision", "f1", "lr")


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 256
    lr: float = 1e-3
    patience: int = 10
    factor: float = 0.1
    min_lr: float = 1e-6
    threshold: float = 1e-4
    shuffle_seed: int = 0
    dropout_seed: int = 0
    eval_batch_size: int = 512

    def __post_init__(self):
        if self.epochs < 1:
            raise UsageError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise UsageError(f"batch size must be >= 2 for batchnorm, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    recall: float
    precision: float
    f1: float
    lr: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")

    def val_losses(self):
        return [r.val_loss for r in self.records]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(HISTORY_COLUMNS)
            for r in self.records:
                wr.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:]])


def compute_metrics(logp: np.ndarray, labels: np.ndarray):
    """Recall, precision and F1 of the fire class; fire predicted iff exp(logp_fire) > 0.5."""
    pred_fire = np.exp(logp[:, 0]) > 0.5
    is_fire = np.asarray(labels) == FIRE
    tp = int(np.sum(pred_fire & is_fire))
    fp = int(np.sum(pred_fire & ~is_fire))
    fn = int(np.sum(~pred_fire & is_fire))
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return recall, precision, f1


def predict_logp(bundle: ModelBundle, data: PatchDataset, batch_size=512) -> np.ndarray:
    out = []
    for s in range(0, len(data), batch_size):
        out.append(bundle.forward(data.x[s:s + batch_size], data.clc[s:s + batch_size],
                                  training=False, store=False))
    return np.concatenate(out) if out else np.empty((0, 2), bundle.dtype)


def evaluate(bundle: ModelBundle, data: PatchDataset, batch_size=512):
    """Mean NLL and (recall, precision, F1) in eval mode."""
    logp = predict_logp(bundle, data, batch_size)
    loss, _ = nll_loss(logp, data.labels)
    return loss, compute_metrics(logp, data.labels)


def _batches(perm: np.ndarray, size: int):
    chunks = [perm[s:s + size] for s in range(0, len(perm), size)]
    # batchnorm cannot train on a single sample: fold it into the previous batch
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        last = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], last])
    return chunks


def train(bundle: ModelBundle, train_data: PatchDataset, val_data: PatchDataset,
          config: TrainConfig, progress=None):
    """Train a private copy of ``bundle``; return (best snapshot, history)."""
    if len(train_data) < 2 or len(val_data) < 1:
        raise UsageError("training needs at least 2 training and 1 validation samples")
    model = bundle.copy()
    shuffle_rng = np.random.default_rng(config.shuffle_seed)
    model.set_dropout(rng=np.random.default_rng(config.dropout_seed))
    adam = AdamState(lr=config.lr)
    sched = PlateauSchedulerState(lr=config.lr, patience=config.patience, factor=config.factor,
                                  min_lr=config.min_lr, threshold=config.threshold)
    history = TrainHistory()
    best_state = None
    n = len(train_data)
    for epoch in range(config.epochs):
        total = 0.0
        for b, idx in enumerate(_batches(shuffle_rng.permutation(n), config.batch_size)):
            model.zero_grad()
            logp = model.forward(train_data.x[idx], train_data.clc[idx], training=True)
            loss, dlogp = nll_loss(logp, train_data.labels[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch {b}")
            model.backward(dlogp)
            try:
                adam_step(model.params, model.grads, adam)
            except FloatingPointError as exc:
                raise NumericError(f"epoch {epoch}, batch {b}: {exc}") from exc
            total += loss * len(idx)
        val_loss, (rec, prec, f1) = evaluate(model, val_data, config.eval_batch_size)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.records.append(EpochRecord(epoch, total / n, val_loss, rec, prec, f1, adam.lr))
        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_state = {k: v.copy() for k, v in model.state_arrays().items()}
        adam.lr = plateau_update(sched, val_loss)
        if progress:
            progress(history.records[-1])
    best = ModelBundle(model.config)
    best.load_state_arrays(best_state)
    best.provenance = {
        "init_seed": int(bundle.config.init_seed),
        "shuffle_seed": int(config.shuffle_seed),
        "dropout_seed": int(config.dropout_seed),
        "epochs_trained": int(config.epochs),
        "best_epoch": int(history.best_epoch),
        "best_val_loss": float(history.best_val_loss),
    }
    return best, history


# ---------------------------------------------------------------- ensembles

@dataclass
class EnsembleSpec:
    members: int = 7
    seeds: tuple | None = None
    base_seed: int = 100

    def __post_init__(self):
        if self.seeds is None:
            self.seeds = tuple(self.base_seed + i for i in range(self.members))
        self.seeds = tuple(int(s) for s in self.seeds)
        if len(self.seeds) != self.members:
            raise UsageError(f"{self.members} members but {len(self.seeds)} seeds")
        if len(set(self.seeds)) != len(self.seeds):
            raise UsageError(f"ensemble seeds must be distinct, got {self.seeds}")


def member_train_config(config: TrainConfig, seed: int) -> TrainConfig:
    """Per-member shuffle/dropout streams derived from the member seed."""
    ss = np.random.SeedSequence([config.shuffle_seed, config.dropout_seed, seed])
    a, b = ss.generate_state(2)
    return replace(config, shuffle_seed=int(a), dropout_seed=int(b))


def train_member(model_config: ModelConfig, spec: EnsembleSpec, i: int, train_data, val_data,
                 config: TrainConfig, progress=None):
    seed = spec.seeds[i]
    bundle = build_model(with_seed(model_config, seed))
    try:
        best, hist = train(bundle, train_data, val_data, member_train_config(config, seed), progress)
    except NumericError as exc:
        raise NumericError(f"ensemble member {i} (seed {seed}): {exc}") from exc
    best.provenance["member"] = i
    return best, hist


def train_ensemble(model_config: ModelConfig, spec: EnsembleSpec, train_data, val_data,
                   config: TrainConfig, workers: int = 1, progress=None):
    """Train every member independently; returns (bundles, histories)."""
    def run(i):
        return train_member(model_config, spec, i, train_data, val_data, config,
                            (lambda r, i=i: progress(i, r)) if progress else None)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, range(spec.members)))
    else:
        results = [run(i) for i in range(spec.members)]
    return [r[0] for r in results], [r[1] for r in results]
