"""Attentional LSTM encoder-decoder with optional rewriting-pattern inputs.

The decoder can be conditioned on a pattern vector concatenated to its
input embedding at every step; a bank of K trainable pattern embeddings
turns the single decoder into K virtual decoders that share all other
weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DimensionError
from .tensor import Tensor
from .vocab import BOS, EOS

MODES = ("dpage", "seq2seq", "noise", "vae")


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    num_layers: int = 1
    pattern_dim: int = 8
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 5:
            raise ConfigError("vocab_size must be >= 5 (four reserved specials)")
        if min(self.embed_dim, self.hidden_dim, self.num_layers) < 1:
            raise ConfigError("all dimensions must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.k > 1 and self.pattern_dim < 1:
            raise ConfigError("pattern_dim must be >= 1 when k > 1")


class LSTMCellParams:
    """Gate matrices of shape (hidden, input + hidden + 1); the trailing
    column is the bias, fed by an always-1 appended input."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        shape = (hidden_dim, input_dim + hidden_dim + 1)
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.w_i = T.parameter(rng.uniform(-0.1, 0.1, shape))
        self.w_f = T.parameter(rng.uniform(-0.1, 0.1, shape))
        self.w_o = T.parameter(rng.uniform(-0.1, 0.1, shape))
        self.w_u = T.parameter(rng.uniform(-0.1, 0.1, shape))

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w_i": self.w_i, f"{prefix}.w_f": self.w_f,
                f"{prefix}.w_o": self.w_o, f"{prefix}.w_u": self.w_u}


def lstm_step(params: LSTMCellParams, h_prev: Tensor, c_prev: Tensor,
              x: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM cell update on row-batched inputs (rows are batch entries)."""
    if x.shape[1] != params.input_dim or h_prev.shape[1] != params.hidden_dim:
        raise DimensionError(
            f"lstm_step got x {x.shape}, h {h_prev.shape}; cell wants "
            f"input {params.input_dim}, hidden {params.hidden_dim}")
    ones = Tensor(np.ones((x.shape[0], 1)))
    z = T.concat(T.concat(x, h_prev, axis=1), ones, axis=1)
    i = T.sigmoid(T.linear(z, params.w_i))
    f = T.sigmoid(T.linear(z, params.w_f))
    o = T.sigmoid(T.linear(z, params.w_o))
    u = T.tanh(T.linear(z, params.w_u))
    c = T.add(T.mul(f, c_prev), T.mul(i, u))
    h = T.mul(o, T.tanh(c))
    return h, c


@dataclass
class EncoderOutput:
    states: list[Tensor]               # top-layer h per source position, each (B, hidden)
    finals: list[tuple[Tensor, Tensor]]  # per-layer (h, c)


@dataclass
class DecoderState:
    layers: list[tuple[Tensor, Tensor]]
    t: int = 0


def attend(h_dec: Tensor, states: Sequence[Tensor]) -> tuple[Tensor, Tensor]:
    """Dot-product global attention.

    Returns (context, weights); weights has one column per source position
    and each row sums to 1.
    """
    if not states:
        raise ContractError("attend needs at least one encoder state")
    scores = [T.tsum(T.mul(h_dec, s), axis=1, keepdims=True) for s in states]
    cat = scores[0]
    for s in scores[1:]:
        cat = T.concat(cat, s, axis=1)
    weights = T.softmax(cat)
    cols = T.split(weights, [1] * len(states), axis=1)
    context = T.scale_rows(states[0], cols[0])
    for s, w in zip(states[1:], cols[1:]):
        context = T.add(context, T.scale_rows(s, w))
    return context, weights


class Seq2SeqModel:
    """Stacked LSTM encoder/decoder with dot attention and softmax output.

    mode selects how the decoder is conditioned:
      dpage   - trainable pattern embedding concatenated to each input
      noise   - externally supplied noise vector in the same slot
      vae     - noise added to the encoder final state, plain decoder input
      seq2seq - plain decoder input
    """

    def __init__(self, config: ModelConfig, mode: str = "seq2seq"):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        if mode in ("dpage", "noise") and config.pattern_dim < 1:
            raise ConfigError(f"mode {mode!r} needs pattern_dim >= 1")
        self.config = config
        self.mode = mode
        rng = np.random.default_rng(config.seed)
        c = config
        self.embedding = T.parameter(rng.uniform(-0.1, 0.1, (c.vocab_size, c.embed_dim)))
        self.enc_cells = [LSTMCellParams(c.embed_dim if i == 0 else c.hidden_dim,
                                         c.hidden_dim, rng)
                          for i in range(c.num_layers)]
        dec_in = c.embed_dim + (c.pattern_dim if self.uses_pattern_input else 0)
        self.dec_cells = [LSTMCellParams(dec_in if i == 0 else c.hidden_dim,
                                         c.hidden_dim, rng)
                          for i in range(c.num_layers)]
        # output logits read [attention context; decoder hidden] so the
        # decoder keeps direct control over the emitted token
        self.w_out = T.parameter(rng.uniform(-0.1, 0.1, (c.vocab_size, 2 * c.hidden_dim)))
        self.patterns: Optional[Tensor] = None
        if mode == "dpage":
            self.patterns = T.parameter(rng.uniform(-0.1, 0.1, (c.k, c.pattern_dim)))

    @property
    def uses_pattern_input(self) -> bool:
        return self.mode in ("dpage", "noise")

    def parameters(self) -> dict[str, Tensor]:
        out = {"embedding": self.embedding}
        for i, cell in enumerate(self.enc_cells):
            out.update(cell.named(f"enc.l{i}"))
        for i, cell in enumerate(self.dec_cells):
            out.update(cell.named(f"dec.l{i}"))
        out["out.w"] = self.w_out
        if self.patterns is not None:
            out["patterns"] = self.patterns
        return out

    # ------------------------------------------------------------------
    # encoder

    def encode_batch(self, ids: np.ndarray) -> EncoderOutput:
        """Run the stacked encoder over a (B, N) id matrix from zero state."""
        ids = np.asarray(ids, dtype=np.intp)
        if ids.ndim != 2 or ids.shape[1] == 0:
            raise ContractError("encoder input must be a non-empty (B, N) id matrix")
        if ids.min() < 0 or ids.max() >= self.config.vocab_size:
            raise ContractError("token id out of vocabulary range")
        b, n = ids.shape
        hd = self.config.hidden_dim
        zeros = lambda: Tensor(np.zeros((b, hd)))
        layers = [(zeros(), zeros()) for _ in self.enc_cells]
        top_states = []
        for t in range(n):
            x = T.rows(self.embedding, ids[:, t])
            for li, cell in enumerate(self.enc_cells):
                h, c = lstm_step(cell, layers[li][0], layers[li][1], x)
                layers[li] = (h, c)
                x = h
            top_states.append(x)
        return EncoderOutput(states=top_states, finals=list(layers))

    def encode(self, source: Sequence[int]) -> EncoderOutput:
        if len(source) == 0:
            raise ContractError("source sequence must be non-empty")
        return self.encode_batch(np.asarray(source, dtype=np.intp).reshape(1, -1))

    def initial_decoder_state(self, enc: EncoderOutput) -> DecoderState:
        return DecoderState(layers=list(enc.finals), t=0)

    # ------------------------------------------------------------------
    # decoder

    def _decoder_input(self, y_prev_ids: np.ndarray, pattern: Optional[Tensor]) -> Tensor:
        x = T.rows(self.embedding, y_prev_ids)
        if self.uses_pattern_input:
            if pattern is None:
                raise ContractError(f"mode {self.mode!r} requires a pattern input")
            if pattern.shape != (x.shape[0], self.config.pattern_dim):
                raise DimensionError(
                    f"pattern shape {pattern.shape} != ({x.shape[0]}, {self.config.pattern_dim})")
            x = T.concat(x, pattern, axis=1)
        elif pattern is not None:
            raise ContractError(f"mode {self.mode!r} takes no pattern input")
        return x

    def _dec_stack(self, x: Tensor, state: DecoderState) -> tuple[Tensor, DecoderState]:
        layers = list(state.layers)
        for li, cell in enumerate(self.dec_cells):
            h, c = lstm_step(cell, layers[li][0], layers[li][1], x)
            layers[li] = (h, c)
            x = h
        return x, DecoderState(layers=layers, t=state.t + 1)

    def _step_logits(self, state: DecoderState, y_prev_ids: np.ndarray,
                     pattern: Optional[Tensor],
                     enc_states: Sequence[Tensor]) -> tuple[Tensor, DecoderState]:
        x = self._decoder_input(y_prev_ids, pattern)
        h_top, new_state = self._dec_stack(x, state)
        context, _ = attend(h_top, enc_states)
        return T.linear(T.concat(context, h_top, axis=1), self.w_out), new_state

    def decode_step(self, state: DecoderState, y_prev, pattern: Optional[Tensor],
                    enc: EncoderOutput) -> tuple[Tensor, DecoderState]:
        """One teacher-forcing/generation step; returns (dist over V, state')."""
        ids = np.atleast_1d(np.asarray(y_prev, dtype=np.intp))
        if ids.min() < 0 or ids.max() >= self.config.vocab_size:
            raise ContractError("previous-token id out of range")
        logits, new_state = self._step_logits(state, ids, pattern, enc.states)
        return T.softmax(logits), new_state

    # ------------------------------------------------------------------
    # loss

    def nll_rows(self, enc_states: Sequence[Tensor],
                 init_layers: list[tuple[Tensor, Tensor]],
                 y_in: np.ndarray, y_tgt: np.ndarray,
                 pattern: Optional[Tensor]) -> Tensor:
        """Teacher-forced negative log likelihood per row.

        y_in/y_tgt are (R, S) id matrices (BOS-prefixed inputs, EOS-suffixed
        targets); returns an (R, 1) column of per-row loss sums.
        """
        state = DecoderState(layers=list(init_layers), t=0)
        total: Optional[Tensor] = None
        for t in range(y_in.shape[1]):
            logits, state = self._step_logits(state, y_in[:, t], pattern, enc_states)
            ll = T.pick(T.log_softmax(logits), y_tgt[:, t])
            total = ll if total is None else T.add(total, ll)
        return T.neg(total)

    def sequence_nll(self, source: Sequence[int], target: Sequence[int],
                     k: int = 0, pattern_override: Optional[Tensor] = None) -> Tensor:
        """Sequence cross entropy summed over target tokens plus EOS."""
        if len(source) == 0 or len(target) == 0:
            raise ContractError("source and target must be non-empty")
        enc = self.encode(source)
        y_in = np.asarray([[BOS] + list(target)], dtype=np.intp)
        y_tgt = np.asarray([list(target) + [EOS]], dtype=np.intp)
        pattern = pattern_override
        if pattern is None and self.mode == "dpage":
            if not 0 <= k < self.config.k:
                raise ContractError(f"pattern index {k} out of range")
            pattern = T.rows(self.patterns, [k])
        loss = self.nll_rows(enc.states, enc.finals, y_in, y_tgt, pattern)
        return T.tsum(loss)
