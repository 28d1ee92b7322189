import numpy as np
import pytest

from dpage.model import ModelConfig, Seq2SeqModel
from dpage.vocab import ParaphrasePair


@pytest.fixture
def tiny_config():
    # 5 content words + 4 specials, 2 hidden units: small enough for
    # finite differences and exhaustive oracles
    return ModelConfig(vocab_size=9, embed_dim=3, hidden_dim=2, num_layers=1,
                       pattern_dim=2, k=3, seed=42)


@pytest.fixture
def tiny_dpage(tiny_config):
    return Seq2SeqModel(tiny_config, mode="dpage")


@pytest.fixture
def tiny_seq2seq():
    cfg = ModelConfig(vocab_size=9, embed_dim=3, hidden_dim=2, num_layers=1,
                      pattern_dim=0, k=1, seed=42)
    return Seq2SeqModel(cfg, mode="seq2seq")


def toy_pairs(rng: np.random.Generator, n: int, vocab_size: int = 9,
              min_len: int = 2, max_len: int = 4) -> list[ParaphrasePair]:
    pairs = []
    for _ in range(n):
        ls = int(rng.integers(min_len, max_len + 1))
        lt = int(rng.integers(min_len, max_len + 1))
        src = tuple(int(i) for i in rng.integers(4, vocab_size, ls))
        tgt = tuple(int(i) for i in rng.integers(4, vocab_size, lt))
        pairs.append(ParaphrasePair(src, tgt))
    return pairs
