"""End-to-end weakly supervised training: teacher-forced sequence loss,
clipped Adam steps, and the epoch loop with held-out evaluation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .model import RecognizerModel
from .optim import adam_step, clip_grad_norm, zero_grads
from .tensor import Tensor, no_grad


class TrainingDiverged(RuntimeError):
    """Raised when a step produces a non-finite loss or activations."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    clip_norm: float = 0.1
    batch_size: int = 40
    epochs: int = 50
    epoch_fraction: float = 0.01
    dropout_p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0.0 < self.epoch_fraction <= 1.0:
            raise ValueError("epoch_fraction must lie in (0, 1]")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """CPU-scale defaults: full-dataset epochs with small batches."""
        base = dict(batch_size=16, epoch_fraction=1.0)
        base.update(overrides)
        return cls(**base)


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    dev_accuracies: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    best_accuracy: float = 0.0
    best_epoch: int = -1


def nll_loss(logits: Tensor, targets: np.ndarray,
             pad_id: int | None = None) -> Tensor:
    """Negative log-likelihood of the gold tokens.

    logits row i scores targets[i] (the i+1-th sequence element given the
    shifted-in prefix).  Positions equal to pad_id are excluded.  A 2-d
    logits tensor gives the per-sequence sum; a 3-d batch gives the mean
    over batch elements of per-sequence sums.
    """
    tgt = np.asarray(targets)
    if tgt.shape != logits.shape[:-1]:
        raise ValueError(f"targets shape {tgt.shape} != {logits.shape[:-1]}")
    if tgt.min() < 0 or tgt.max() >= logits.shape[-1]:
        raise ValueError("target index out of range")
    picked = T.gather_last(T.log_softmax(logits), tgt)
    if pad_id is not None:
        keep = Tensor((tgt != pad_id).astype(np.float64))
        picked = T.mul(picked, keep)
    total = T.tsum(picked)
    batch = logits.shape[0] if logits.ndim == 3 else 1
    return T.scale(total, -1.0 / batch)


def train_step(batch, model: RecognizerModel, cfg: TrainConfig,
               rng: np.random.Generator) -> float:
    """One optimization step on a batch of (image, label) samples: forward
    with teacher forcing, backprop, clip to cfg.clip_norm, Adam at cfg.lr,
    and zero the gradients afterwards."""
    images = [s.image for s in batch]
    labels = [s.label for s in batch]
    windows = model.windows_batch(images)
    tgt_in, tgt_out, _ = model.prepare_targets(labels)
    params = model.parameters()
    try:
        logits, _ = model.logits_for_batch(windows, tgt_in, training=True, rng=rng)
        loss = nll_loss(logits, tgt_out, pad_id=model.vocab.pad_id)
        loss_value = loss.item()
        if not math.isfinite(loss_value):
            raise FloatingPointError(f"loss = {loss_value}")
        T.backward(loss)
    except FloatingPointError as exc:
        zero_grads(params)
        raise TrainingDiverged(
            f"non-finite values during a step on labels {labels!r}: {exc}") from exc
    clip_grad_norm(params, cfg.clip_norm)
    adam_step(params, cfg.lr)
    zero_grads(params)
    return loss_value


def epoch_schedule(n: int, fraction: float, batch_size: int, seed: int,
                   epoch: int) -> list[np.ndarray]:
    """Seeded without-replacement sample of ceil(fraction*n) indices,
    reshuffled per epoch and split into batches."""
    take = math.ceil(fraction * n)
    order = np.random.default_rng([seed, epoch]).permutation(n)[:take]
    return [order[i:i + batch_size] for i in range(0, take, batch_size)]


def greedy_decode_batch(model: RecognizerModel, images: list,
                        max_len: int = 25) -> list[str]:
    """Stepwise-argmax decoding of a batch (equivalent to beam width 1)."""
    v = model.vocab
    with no_grad():
        src = model.encode_images(images)
        B = len(images)
        tokens = np.full((B, 1), v.bos_id, dtype=np.int64)
        done = np.zeros(B, dtype=bool)
        outputs: list[list[int]] = [[] for _ in range(B)]
        for _ in range(max_len):
            logits, _ = model.seq2seq.decode_teacher_forced(tokens, src)
            nxt = logits.data[:, -1, :].argmax(axis=-1)
            for i in range(B):
                if not done[i]:
                    if nxt[i] == v.eos_id:
                        done[i] = True
                    else:
                        outputs[i].append(int(nxt[i]))
            if done.all():
                break
            tokens = np.concatenate([tokens, nxt[:, None]], axis=1)
    return [v.decode(out) for out in outputs]


def sequence_accuracy(model: RecognizerModel, samples, max_len: int = 25,
                      batch_size: int = 64) -> float:
    if not samples:
        raise ValueError("empty evaluation set")
    hits = 0
    for i in range(0, len(samples), batch_size):
        chunk = samples[i:i + batch_size]
        preds = greedy_decode_batch(model, [s.image for s in chunk], max_len)
        hits += sum(p == s.label for p, s in zip(preds, chunk))
    return hits / len(samples)


def train_loop(dataset, cfg: TrainConfig, model: RecognizerModel,
               dev=None, checkpoint_path=None,
               stop_accuracy: float | None = None,
               log=None) -> TrainReport:
    """Seeded epoch loop: subsample, step, evaluate on the held-out split,
    and checkpoint the best model seen."""
    if not dataset:
        raise ValueError("empty training dataset")
    from .checkpoint import save_checkpoint  # serialization lives with the data layer

    report = TrainReport()
    start = time.monotonic()
    n = len(dataset)
    for epoch in range(cfg.epochs):
        rng_drop = np.random.default_rng([cfg.seed, epoch, 1])
        losses = []
        for idx in epoch_schedule(n, cfg.epoch_fraction, cfg.batch_size,
                                  cfg.seed, epoch):
            losses.append(train_step([dataset[i] for i in idx], model, cfg,
                                     rng_drop))
        report.epoch_losses.append(float(np.mean(losses)))
        acc = sequence_accuracy(model, dev) if dev else 0.0
        report.dev_accuracies.append(acc)
        if dev and acc >= report.best_accuracy:
            report.best_accuracy = acc
            report.best_epoch = epoch
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, model)
        if log is not None:
            log(f"epoch {epoch}: loss {report.epoch_losses[-1]:.4f}"
                + (f", dev acc {acc:.4f}" if dev else ""))
        if stop_accuracy is not None and dev and acc >= stop_accuracy:
            break
    report.wall_time = time.monotonic() - start
    if checkpoint_path is not None and not dev:
        save_checkpoint(checkpoint_path, model)
    return report
