"""Token/id vocabulary with reserved specials, plus corpus containers."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import ContractError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")


class Vocabulary:
    """Bijective token<->id map; ids 0..3 are PAD, BOS, EOS, UNK."""

    def __init__(self, tokens: Iterable[str]):
        self.id_to_token: list[str] = list(SPECIALS)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(SPECIALS)}
        for tok in tokens:
            if tok in self.token_to_id:
                raise ContractError(f"duplicate token {tok!r}")
            self.token_to_id[tok] = len(self.id_to_token)
            self.id_to_token.append(tok)
        if len(self.id_to_token) < 5:
            raise ContractError("vocabulary needs at least one non-special token")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def decode_text(self, ids: Sequence[int]) -> str:
        return " ".join(self.id_to_token[i] for i in ids if i not in (PAD, BOS, EOS))


@dataclass(frozen=True)
class ParaphrasePair:
    """Aligned source/target id sequences; the optional pattern label is
    generator bookkeeping only and is never shown to training."""
    source: tuple[int, ...]
    target: tuple[int, ...]
    pattern: Optional[int] = None

    def __post_init__(self):
        if not self.source or not self.target:
            raise ContractError("paraphrase pair sides must be non-empty")


def build_vocab(corpus: Iterable[Sequence[str]], min_freq: int = 1) -> Vocabulary:
    """Frequency-ordered vocabulary (ties broken lexicographically).

    Tokens below min_freq are left out and will encode to UNK.
    """
    counts: Counter[str] = Counter()
    empty = True
    for line in corpus:
        empty = False
        counts.update(line)
    if empty:
        raise ContractError("cannot build a vocabulary from an empty corpus")
    kept = [t for t, c in counts.items() if c >= min_freq]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept)
