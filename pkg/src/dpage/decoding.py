"""Beam-search generation of K output sequences per input.

Scoring is raw cumulative log probability (no length normalization), so
small search spaces can be checked against exhaustive enumeration.
Hypotheses that emit EOS are retired immediately; at max_len the EOS is
forced. PAD and BOS are never emitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError
from .model import DecoderState, EncoderOutput, Seq2SeqModel
from .tensor import Tensor
from .training import make_noise_bank
from .vocab import BOS, EOS, PAD

DECODE_MODES = ("dpage", "beam", "noise", "vae", "greedy")


@dataclass
class DecodeConfig:
    beam_size: int = 5
    top_k: int = 1
    max_len: int = 30
    mode: str = "dpage"
    noise_seed: int = 0

    def __post_init__(self):
        if self.mode not in DECODE_MODES:
            raise ConfigError(f"unknown decode mode {self.mode!r}")
        if self.max_len < 1 or self.beam_size < 1 or self.top_k < 1:
            raise ConfigError("beam_size, top_k and max_len must be >= 1")
        if self.mode == "beam" and self.top_k > self.beam_size:
            raise ConfigError(f"top_k {self.top_k} exceeds beam size {self.beam_size}")


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]       # includes the trailing EOS once finished
    logprob: float
    finished: bool

    @property
    def output_ids(self) -> tuple[int, ...]:
        return tuple(i for i in self.ids if i != EOS)


def _step_logprobs(model: Seq2SeqModel, state: DecoderState, y_prev: np.ndarray,
                   pattern: Optional[np.ndarray], enc: EncoderOutput,
                   rows: int) -> tuple[np.ndarray, DecoderState]:
    enc_states = [Tensor(np.repeat(s.data, rows, axis=0)) for s in enc.states]
    pat = None
    if pattern is not None:
        pat = Tensor(np.tile(pattern, (rows, 1)))
    logits, new_state = model._step_logits(state, y_prev, pat, enc_states)
    return T.log_softmax(logits).data, new_state


def beam_search(model: Seq2SeqModel, source: Sequence[int], beam_size: int,
                pattern: Optional[np.ndarray] = None, max_len: int = 30,
                enc_override: Optional[EncoderOutput] = None) -> list[Hypothesis]:
    """All finished hypotheses found by a width-B search, best first.

    Result is sorted by log probability (ties by token ids) and contains
    no duplicate token sequences.
    """
    if beam_size < 1 or max_len < 1:
        raise ConfigError("beam_size and max_len must be >= 1")
    with T.no_grad():
        enc = enc_override if enc_override is not None else model.encode(source)
        state = DecoderState(layers=list(enc.finals), t=0)
        live_tokens: list[tuple[int, ...]] = [()]
        live_scores = np.zeros(1)
        pool: list[Hypothesis] = []
        for t in range(max_len + 1):
            rows = len(live_tokens)
            y_prev = np.asarray([seq[-1] if seq else BOS for seq in live_tokens],
                                dtype=np.intp)
            lp, new_state = _step_logprobs(model, state, y_prev, pattern, enc, rows)
            if t == max_len:
                for r, seq in enumerate(live_tokens):
                    pool.append(Hypothesis(seq + (EOS,),
                                           float(live_scores[r] + lp[r, EOS]), True))
                break
            total = live_scores[:, None] + lp
            total[:, PAD] = -np.inf
            total[:, BOS] = -np.inf
            flat = total.reshape(-1)
            order = np.argsort(-flat, kind="stable")[:beam_size]
            v = total.shape[1]
            next_tokens: list[tuple[int, ...]] = []
            next_scores: list[float] = []
            keep_rows: list[int] = []
            for idx in order:
                r, tok = divmod(int(idx), v)
                score = float(flat[idx])
                if not np.isfinite(score):
                    continue
                if tok == EOS:
                    pool.append(Hypothesis(live_tokens[r] + (EOS,), score, True))
                else:
                    next_tokens.append(live_tokens[r] + (tok,))
                    next_scores.append(score)
                    keep_rows.append(r)
            if not next_tokens:
                break
            live_tokens = next_tokens
            live_scores = np.asarray(next_scores)
            state = DecoderState(
                layers=[(Tensor(h.data[keep_rows]), Tensor(c.data[keep_rows]))
                        for h, c in new_state.layers],
                t=new_state.t)
    seen: set[tuple[int, ...]] = set()
    out = []
    for hyp in sorted(pool, key=lambda h: (-h.logprob, h.ids)):
        if hyp.ids not in seen:
            seen.add(hyp.ids)
            out.append(hyp)
    return out


def greedy_decode(model: Seq2SeqModel, source: Sequence[int],
                  pattern: Optional[np.ndarray] = None, max_len: int = 30,
                  enc_override: Optional[EncoderOutput] = None) -> Hypothesis:
    """Argmax decoding; equivalent to beam_search with beam 1."""
    with T.no_grad():
        enc = enc_override if enc_override is not None else model.encode(source)
        state = DecoderState(layers=list(enc.finals), t=0)
        tokens: tuple[int, ...] = ()
        score = 0.0
        for t in range(max_len + 1):
            y_prev = np.asarray([tokens[-1] if tokens else BOS], dtype=np.intp)
            lp, state = _step_logprobs(model, state, y_prev, pattern, enc, 1)
            if t == max_len:
                return Hypothesis(tokens + (EOS,), score + float(lp[0, EOS]), True)
            row = lp[0].copy()
            row[PAD] = -np.inf
            row[BOS] = -np.inf
            tok = int(np.argmax(row))
            score += float(row[tok])
            if tok == EOS:
                return Hypothesis(tokens + (EOS,), score, True)
            tokens = tokens + (tok,)
    raise AssertionError("unreachable")


def dpage_decode_k(model: Seq2SeqModel, source: Sequence[int], beam_size: int = 5,
                   max_len: int = 30) -> list[Hypothesis]:
    """Top beam hypothesis under each pattern embedding, in pattern order."""
    if model.mode != "dpage":
        raise ContractError(f"dpage decoding needs a dpage model, got {model.mode!r}")
    out = []
    for k in range(model.config.k):
        hyps = beam_search(model, source, beam_size,
                           pattern=model.patterns.data[k], max_len=max_len)
        out.append(hyps[0])
    return out


def beam_topk_decode(model: Seq2SeqModel, source: Sequence[int], beam_size: int,
                     top_k: int, max_len: int = 30) -> list[Hypothesis]:
    """Distinct top-K hypotheses of one beam search."""
    if top_k > beam_size:
        raise ConfigError(f"top_k {top_k} exceeds beam size {beam_size}")
    hyps = beam_search(model, source, beam_size, max_len=max_len)
    if len(hyps) < top_k:
        raise ContractError(f"beam produced only {len(hyps)} hypotheses, wanted {top_k}")
    return hyps[:top_k]


def noise_decode_k(model: Seq2SeqModel, source: Sequence[int], beam_size: int,
                   k: int, seed: int, max_len: int = 30) -> list[Hypothesis]:
    """Top-1 beam per fixed noise vector from the deterministic bank."""
    if model.mode != "noise":
        raise ContractError(f"noise decoding needs a noise model, got {model.mode!r}")
    bank = make_noise_bank(k, model.config.pattern_dim, seed)
    return [beam_search(model, source, beam_size, pattern=bank[i],
                        max_len=max_len)[0]
            for i in range(k)]


def vae_decode_k(model: Seq2SeqModel, source: Sequence[int], beam_size: int,
                 k: int, seed: int, max_len: int = 30) -> list[Hypothesis]:
    """Top-1 beam per fixed offset added to the encoder final state."""
    if model.mode != "vae":
        raise ContractError(f"vae decoding needs a vae model, got {model.mode!r}")
    bank = make_noise_bank(k, model.config.hidden_dim, seed)
    out = []
    with T.no_grad():
        enc = model.encode(source)
    for i in range(k):
        z = Tensor(bank[i].reshape(1, -1))
        shifted = EncoderOutput(states=enc.states,
                                finals=[(T.add(h, z), c) for h, c in enc.finals])
        out.append(beam_search(model, source, beam_size, max_len=max_len,
                               enc_override=shifted)[0])
    return out
