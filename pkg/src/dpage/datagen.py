"""Deterministic synthetic benchmarks and corpus ingestion.

Two generators with known rewriting patterns:
  syn-sub   - K disjoint synonym dictionaries applied word-for-word
  syn-scale - metric unit conversion of integer lengths, digit-tokenized

Both emit train pairs (without pattern labels), test inputs, and K
line-aligned reference sets, all reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError, DataFormatError

UNITS = ("km", "dm", "cm", "mm", "μm")
_UNIT_SHIFT = {"km": -3, "dm": 1, "cm": 2, "mm": 3, "μm": 6}

TokenLine = list[str]


@dataclass
class SynConfig:
    seed: int = 0
    k: int = 5
    vocab_size: int = 50          # syn-sub source vocabulary
    min_len: int = 6
    max_len: int = 20
    train_inputs: int = 5000
    test_inputs: int = 1000

    def __post_init__(self):
        if min(self.k, self.vocab_size, self.train_inputs, self.test_inputs) < 1:
            raise ConfigError("all counts must be positive")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError("invalid length range")


@dataclass
class SynDataset:
    train: list[tuple[TokenLine, TokenLine, int]]  # (source, target, pattern id)
    test_inputs: list[TokenLine]
    references: list[list[TokenLine]]              # K sets, line-aligned to inputs


def convert_unit(meters: int, unit: str) -> TokenLine:
    """Exact decimal rescaling of an integer length, one token per symbol."""
    if unit not in _UNIT_SHIFT:
        raise ConfigError(f"unsupported unit {unit!r}; expected one of {UNITS}")
    if not 1000 <= meters <= 10000:
        raise ContractError(f"meters must lie in [1000, 10000], got {meters}")
    digits = str(meters)
    shift = _UNIT_SHIFT[unit]
    if shift > 0:
        text = digits + "0" * shift
    else:
        text = digits[:shift] + "." + digits[shift:]
    return list(text) + [unit]


def gen_syn_scale(config: SynConfig) -> SynDataset:
    """Unit-conversion benchmark: disjoint train/test integers per seed."""
    rng = np.random.default_rng(config.seed)
    total = config.train_inputs + config.test_inputs
    if total > 9001:
        raise ConfigError("only 9001 distinct integers exist in [1000, 10000]")
    values = rng.choice(9001, size=total, replace=False) + 1000
    sources = [list(str(int(v))) + ["m"] for v in values]
    train_src = sources[:config.train_inputs]
    test_src = sources[config.train_inputs:]
    train = [(src, convert_unit(int(v), unit), k)
             for src, v in zip(train_src, values[:config.train_inputs])
             for k, unit in enumerate(UNITS)]
    refs = [[convert_unit(int(v), unit) for v in values[config.train_inputs:]]
            for unit in UNITS]
    return SynDataset(train=train, test_inputs=test_src, references=refs)


def make_dictionaries(config: SynConfig) -> list[dict[str, str]]:
    """K injective synonym maps with pairwise-disjoint target vocabularies."""
    rng = np.random.default_rng(config.seed)
    src_words = [f"w{i:02d}" for i in range(config.vocab_size)]
    dicts = []
    for k in range(config.k):
        targets = [f"p{k}x{i:02d}" for i in range(config.vocab_size)]
        perm = rng.permutation(config.vocab_size)
        dicts.append({src_words[i]: targets[int(perm[i])]
                      for i in range(config.vocab_size)})
    return dicts


def gen_syn_sub(config: SynConfig) -> SynDataset:
    """Synonym-substitution benchmark over K disjoint dictionaries."""
    rng = np.random.default_rng(config.seed)
    dicts = make_dictionaries(config)
    src_words = [f"w{i:02d}" for i in range(config.vocab_size)]
    seen: set[tuple[str, ...]] = set()
    sources: list[TokenLine] = []
    while len(sources) < config.train_inputs + config.test_inputs:
        length = int(rng.integers(config.min_len, config.max_len + 1))
        line = [src_words[int(i)] for i in rng.integers(0, config.vocab_size, length)]
        key = tuple(line)
        if key in seen:
            continue
        seen.add(key)
        sources.append(line)
    train_src = sources[:config.train_inputs]
    test_src = sources[config.train_inputs:]
    train = [(src, [d[w] for w in src], k)
             for src in train_src for k, d in enumerate(dicts)]
    refs = [[[d[w] for w in src] for src in test_src] for d in dicts]
    return SynDataset(train=train, test_inputs=test_src, references=refs)


# ---------------------------------------------------------------------------
# file I/O

def write_dataset(dataset: SynDataset, out_dir) -> None:
    """train.tsv, test.src and ref_<k>.txt, UTF-8 with LF endings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train.tsv", "w", encoding="utf-8", newline="\n") as f:
        for src, tgt, _ in dataset.train:
            f.write(" ".join(src) + "\t" + " ".join(tgt) + "\n")
    with open(out / "test.src", "w", encoding="utf-8", newline="\n") as f:
        for src in dataset.test_inputs:
            f.write(" ".join(src) + "\n")
    for k, ref in enumerate(dataset.references):
        with open(out / f"ref_{k}.txt", "w", encoding="utf-8", newline="\n") as f:
            for line in ref:
                f.write(" ".join(line) + "\n")


@dataclass
class TsvLoadResult:
    pairs: list[tuple[TokenLine, TokenLine]]
    errors: list[str] = field(default_factory=list)


def load_tsv_corpus(path) -> TsvLoadResult:
    """Read source<TAB>target pairs; malformed lines are collected, not fatal."""
    result = TsvLoadResult(pairs=[])
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.count("\t") != 1:
                result.errors.append(f"line {lineno}: expected exactly one TAB")
                continue
            src, tgt = line.split("\t")
            src_tokens, tgt_tokens = src.split(), tgt.split()
            if not src_tokens or not tgt_tokens:
                result.errors.append(f"line {lineno}: empty source or target")
                continue
            result.pairs.append((src_tokens, tgt_tokens))
    return result


def read_token_lines(path) -> list[TokenLine]:
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]
