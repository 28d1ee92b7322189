"""scikit-learn style front end for the whole pipeline.

DiverseParaphraser fits on aligned (source, target) text pairs and
predicts K paraphrases per input, so the model slots into sklearn-ish
tooling (get_params/set_params, clone) without callers touching the
tensor machinery.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .decoding import (beam_topk_decode, dpage_decode_k, noise_decode_k,
                       vae_decode_k)
from .errors import ConfigError, ContractError
from .model import ModelConfig, Seq2SeqModel
from .training import TrainingConfig, train
from .vocab import ParaphrasePair, Vocabulary, build_vocab

try:  # sklearn is optional; only the mixin niceties come from it
    from sklearn.base import BaseEstimator
except ImportError:  # pragma: no cover
    class BaseEstimator:  # type: ignore[no-redef]
        def get_params(self, deep=True):
            import inspect
            keys = inspect.signature(self.__init__).parameters
            return {k: getattr(self, k) for k in keys}

        def set_params(self, **params):
            for k, v in params.items():
                setattr(self, k, v)
            return self


def _tokenize(text) -> list[str]:
    return text.split() if isinstance(text, str) else list(text)


class DiverseParaphraser(BaseEstimator):
    """fit(X, y) on parallel text; predict(X) -> K paraphrases per input.

    X and y are sequences of whitespace-tokenized strings (or token
    lists). mode selects the training scheme; predict always returns
    exactly k outputs per input, in decoder order.
    """

    def __init__(self, k: int = 5, mode: str = "dpage", embed_dim: int = 32,
                 hidden_dim: int = 64, num_layers: int = 1, pattern_dim: int = 8,
                 epochs: int = 10, batch_size: int = 32, lr: float = 1.0,
                 decay_start: int = 5, clip: float = 5.0, beam_size: int = 5,
                 max_len: int = 30, seed: int = 0):
        self.k = k
        self.mode = mode
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.pattern_dim = pattern_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.decay_start = decay_start
        self.clip = clip
        self.beam_size = beam_size
        self.max_len = max_len
        self.seed = seed

    def fit(self, X: Sequence, y: Sequence) -> "DiverseParaphraser":
        if len(X) != len(y) or not len(X):
            raise ContractError("X and y must be non-empty and the same length")
        sources = [_tokenize(s) for s in X]
        targets = [_tokenize(t) for t in y]
        self.vocab_: Vocabulary = build_vocab(sources + targets)
        pairs = [ParaphrasePair(tuple(self.vocab_.encode(s)),
                                tuple(self.vocab_.encode(t)))
                 for s, t in zip(sources, targets)]
        k = 1 if self.mode == "seq2seq" else self.k
        config = ModelConfig(vocab_size=len(self.vocab_), embed_dim=self.embed_dim,
                             hidden_dim=self.hidden_dim, num_layers=self.num_layers,
                             pattern_dim=self.pattern_dim, k=k, seed=self.seed)
        tconfig = TrainingConfig(epochs=self.epochs, batch_size=self.batch_size,
                                 lr=self.lr, decay_start=self.decay_start,
                                 clip=self.clip, seed=self.seed, mode=self.mode)
        self.model_: Seq2SeqModel = Seq2SeqModel(config, mode=self.mode)
        result = train(self.model_, pairs, tconfig)
        self.loss_curve_ = result.loss_curve
        self.assignment_stats_ = result.stats
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ContractError("estimator is not fitted; call fit first")

    def predict(self, X: Sequence) -> list[list[str]]:
        """K paraphrases per input, each a whitespace-joined token string."""
        self._check_fitted()
        out = []
        for text in X:
            ids = self.vocab_.encode(_tokenize(text))
            if self.mode == "dpage":
                hyps = dpage_decode_k(self.model_, ids, beam_size=self.beam_size,
                                      max_len=self.max_len)
            elif self.mode == "seq2seq":
                hyps = beam_topk_decode(self.model_, ids, beam_size=max(self.beam_size, self.k),
                                        top_k=self.k, max_len=self.max_len)
            elif self.mode == "noise":
                hyps = noise_decode_k(self.model_, ids, beam_size=self.beam_size,
                                      k=self.k, seed=self.seed, max_len=self.max_len)
            elif self.mode == "vae":
                hyps = vae_decode_k(self.model_, ids, beam_size=self.beam_size,
                                    k=self.k, seed=self.seed, max_len=self.max_len)
            else:
                raise ConfigError(f"unknown mode {self.mode!r}")
            out.append([self.vocab_.decode_text(h.output_ids) for h in hyps])
        return out
