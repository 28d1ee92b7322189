"""Training loop with hard min-loss pattern assignment.

Each pair is scored under all K pattern embeddings; only the winning
branch receives gradient. Noise/VAE baseline modes inject fresh standard
normal vectors instead of learned patterns. Everything is deterministic
per (seed, corpus, config).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError
from .model import MODES, EncoderOutput, Seq2SeqModel
from .tensor import Tensor
from .vocab import BOS, EOS, ParaphrasePair


@dataclass
class TrainingConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1.0
    lr_decay: float = 0.5
    decay_start: int = 5      # epochs after this one get the decay factor
    clip: float = 5.0
    seed: int = 0
    mode: str = "dpage"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("epochs >= 1, batch_size >= 1 and lr > 0 required")
        if self.mode not in MODES:
            raise ConfigError(f"unknown training mode {self.mode!r}")


@dataclass
class AssignmentStats:
    """Per-epoch (and first-10-batch) counts of pairs won by each decoder."""
    k: int
    per_epoch: list[list[int]] = field(default_factory=list)
    first_batches: list[list[int]] = field(default_factory=list)

    def fractions(self, epoch: int = -1) -> list[float]:
        counts = self.per_epoch[epoch]
        total = sum(counts)
        return [c / total for c in counts]

    def to_dict(self) -> dict:
        return {"k": self.k, "per_epoch": self.per_epoch,
                "first_batches": self.first_batches}


@dataclass
class TrainResult:
    model: Seq2SeqModel
    stats: AssignmentStats
    loss_curve: list[float]


def make_noise_bank(k: int, dim: int, seed: int) -> np.ndarray:
    """K fixed standard-normal vectors, deterministic per (k, dim, seed)."""
    if k < 1:
        raise ContractError("noise bank needs k >= 1")
    return np.random.default_rng(seed).standard_normal((k, dim))


def _teacher_matrices(targets: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    y_in = np.asarray([[BOS] + list(t) for t in targets], dtype=np.intp)
    y_tgt = np.asarray([list(t) + [EOS] for t in targets], dtype=np.intp)
    return y_in, y_tgt


def _repeat_encoder(enc: EncoderOutput, k: int) -> EncoderOutput:
    return EncoderOutput(
        states=[T.repeat_rows(s, k) for s in enc.states],
        finals=[(T.repeat_rows(h, k), T.repeat_rows(c, k)) for h, c in enc.finals])


def _offset_finals(enc: EncoderOutput, z: np.ndarray) -> EncoderOutput:
    zt = Tensor(z)
    return EncoderOutput(states=enc.states,
                         finals=[(T.add(h, zt), c) for h, c in enc.finals])


def batch_pattern_losses(model: Seq2SeqModel, sources: np.ndarray,
                         targets: Sequence[Sequence[int]]) -> Tensor:
    """Losses of every (pair, pattern) combination, shape (B*K, 1).

    Row b*K + k holds the loss of pair b under pattern k. The encoder runs
    once per pair and is shared across the K virtual decoders.
    """
    b = sources.shape[0]
    k = model.config.k
    enc = _repeat_encoder(model.encode_batch(sources), k)
    pattern_ids = np.tile(np.arange(k), b)
    patterns = T.rows(model.patterns, pattern_ids)
    y_in, y_tgt = _teacher_matrices(targets)
    return model.nll_rows(enc.states, enc.finals,
                          np.repeat(y_in, k, axis=0), np.repeat(y_tgt, k, axis=0),
                          patterns)


def min_loss_assign(model: Seq2SeqModel, source: Sequence[int],
                    target: Sequence[int]) -> tuple[int, float]:
    """Index and value of the smallest per-pattern loss (ties -> lowest k)."""
    if model.mode != "dpage":
        return 0, float(model.sequence_nll(source, target).item())
    with T.no_grad():
        losses = batch_pattern_losses(
            model, np.asarray(source, dtype=np.intp).reshape(1, -1), [target])
    vals = losses.data.reshape(-1)
    k = int(np.argmin(vals))
    return k, float(vals[k])


def train_step(model: Seq2SeqModel, batch: Sequence[ParaphrasePair],
               config: TrainingConfig, lr: Optional[float] = None,
               rng: Optional[np.random.Generator] = None) -> tuple[float, list[int]]:
    """One SGD update on a same-shape batch; returns (mean loss, counts).

    All sources in the batch must share one length, likewise all targets.
    """
    if not batch:
        raise ContractError("batch must be non-empty")
    if lr is None:
        lr = config.lr
    if rng is None:
        rng = np.random.default_rng(config.seed)
    b = len(batch)
    sources = np.asarray([p.source for p in batch], dtype=np.intp)
    targets = [p.target for p in batch]
    cfg = model.config
    counts = [0] * max(cfg.k, 1)

    if model.mode == "dpage":
        losses = batch_pattern_losses(model, sources, targets)
        mat = losses.data.reshape(b, cfg.k)
        winners = np.argmin(mat, axis=1)
        chosen = T.rows(losses, np.arange(b) * cfg.k + winners)
        for w in winners:
            counts[int(w)] += 1
    else:
        enc = model.encode_batch(sources)
        pattern = None
        if model.mode == "noise":
            pattern = Tensor(rng.standard_normal((b, cfg.pattern_dim)))
        elif model.mode == "vae":
            enc = _offset_finals(enc, rng.standard_normal((b, cfg.hidden_dim)))
        y_in, y_tgt = _teacher_matrices(targets)
        chosen = model.nll_rows(enc.states, enc.finals, y_in, y_tgt, pattern)
        counts[0] = b

    batch_loss = T.scale(T.tsum(chosen), 1.0 / b)
    T.backward(batch_loss)
    T.sgd_step(model.parameters().values(), lr=lr, clip=config.clip)
    return batch_loss.item(), counts


def _make_batches(pairs: Sequence[ParaphrasePair], order: np.ndarray,
                  batch_size: int, rng: np.random.Generator) -> list[list[ParaphrasePair]]:
    # Bucket by exact (source len, target len) so batches need no padding;
    # within-bucket order follows the epoch shuffle.
    buckets: dict[tuple[int, int], list[ParaphrasePair]] = {}
    for i in order:
        p = pairs[int(i)]
        buckets.setdefault((len(p.source), len(p.target)), []).append(p)
    batches = []
    for key in sorted(buckets):
        group = buckets[key]
        for j in range(0, len(group), batch_size):
            batches.append(group[j:j + batch_size])
    return [batches[int(i)] for i in rng.permutation(len(batches))]


def epoch_lr(config: TrainingConfig, epoch: int) -> float:
    """Learning rate for a 1-based epoch index under the decay schedule."""
    return config.lr * config.lr_decay ** max(0, epoch - config.decay_start)


def train(model: Seq2SeqModel, corpus: Sequence[ParaphrasePair],
          config: TrainingConfig) -> TrainResult:
    """Full training run; deterministic given (seed, corpus, config)."""
    if not corpus:
        raise ContractError("training corpus is empty")
    if model.mode != config.mode:
        raise ConfigError(f"model mode {model.mode!r} != config mode {config.mode!r}")
    rng = np.random.default_rng(config.seed)
    stats = AssignmentStats(k=model.config.k)
    loss_curve: list[float] = []
    for epoch in range(1, config.epochs + 1):
        lr = epoch_lr(config, epoch)
        order = rng.permutation(len(corpus))
        batches = _make_batches(corpus, order, config.batch_size, rng)
        epoch_counts = [0] * max(model.config.k, 1)
        loss_sum = 0.0
        seen = 0
        for bi, batch in enumerate(batches):
            loss, counts = train_step(model, batch, config, lr=lr, rng=rng)
            loss_sum += loss * len(batch)
            seen += len(batch)
            for i, c in enumerate(counts):
                epoch_counts[i] += c
            if epoch == 1 and bi < 10:
                stats.first_batches.append(counts)
        stats.per_epoch.append(epoch_counts)
        loss_curve.append(loss_sum / seen)
    return TrainResult(model=model, stats=stats, loss_curve=loss_curve)
