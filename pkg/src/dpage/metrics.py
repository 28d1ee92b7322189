"""Fidelity and diversity metrics over tokenized corpora.

Corpora are lists of token lists (plain strings). BLEU is corpus-level
multi-reference with add-one smoothing on zero higher-order matches; KL
and Jeffrey's Divergence operate on additively smoothed unigram
distributions over the union vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ContractError

Corpus = Sequence[Sequence[str]]


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_aligned(*corpora: Corpus):
    lengths = {len(c) for c in corpora}
    if len(lengths) != 1 or 0 in lengths:
        raise ContractError(f"corpora must be line-aligned and non-empty, got lengths "
                            f"{[len(c) for c in corpora]}")


def multi_ref_bleu(hypotheses: Corpus, references: Sequence[Sequence[Sequence[str]]],
                   max_order: int = 4) -> float:
    """Corpus-level BLEU against per-line reference sets.

    Clipping uses the max n-gram count over a line's references; brevity
    penalty uses the closest reference length (shorter wins ties). Orders
    with zero candidate n-grams corpus-wide are skipped; orders >= 2 with
    zero matches get add-one smoothing.
    """
    _check_aligned(hypotheses, references)
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp, refs in zip(hypotheses, references):
        if not refs:
            raise ContractError("every line needs at least one reference")
        hyp_len += len(hyp)
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, max_order + 1):
            cand = _ngrams(hyp, n)
            if not cand:
                continue
            clip: Counter = Counter()
            for r in refs:
                for g, c in _ngrams(r, n).items():
                    clip[g] = max(clip[g], c)
            totals[n - 1] += sum(cand.values())
            matches[n - 1] += sum(min(c, clip[g]) for g, c in cand.items())
    log_sum = 0.0
    used = 0
    for n in range(max_order):
        if totals[n] == 0:
            continue
        used += 1
        m, t = matches[n], totals[n]
        if m == 0:
            if n == 0:
                return 0.0
            m, t = m + 1, t + 1
        log_sum += math.log(m / t)
    if used == 0:
        return 0.0  # every hypothesis is empty
    geo = math.exp(log_sum / used)
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / max(hyp_len, 1))
    return bp * geo


def sari(sources: Corpus, hypotheses: Corpus,
         references: Sequence[Sequence[Sequence[str]]], max_order: int = 4) -> float:
    """Mean over lines of the keep-F1 / addition-F1 / deletion-precision
    average, orders 1..max_order. Components with no candidates score 1."""
    _check_aligned(sources, hypotheses, references)
    return sum(_sari_sentence(s, h, r, max_order)
               for s, h, r in zip(sources, hypotheses, references)) / len(sources)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _sari_sentence(src, hyp, refs, max_order: int) -> float:
    r = len(refs)
    if r == 0:
        raise ContractError("every line needs at least one reference")
    scores = []
    for n in range(1, max_order + 1):
        sg, hg = _ngrams(src, n), _ngrams(hyp, n)
        rg: Counter = Counter()
        for ref in refs:
            rg.update(_ngrams(ref, n))
        vocab = set(sg) | set(hg) | set(rg)
        # keep: fractional reference counts
        keep_num = keep_p_den = keep_r_den = 0.0
        del_num = del_den = 0.0
        add_num = add_p_den = add_r_den = 0.0
        for g in vocab:
            s_c, h_c, r_c = sg[g], hg[g], rg[g] / r
            kept = min(s_c, h_c)
            keep_target = min(s_c, r_c)
            keep_num += min(kept, keep_target)
            keep_p_den += kept
            keep_r_den += keep_target
            deleted = max(0, s_c - h_c)
            del_target = max(0.0, s_c - r_c)
            del_num += min(deleted, del_target)
            del_den += deleted
            added = 1.0 if (h_c > 0 and s_c == 0) else 0.0
            add_target = 1.0 if (rg[g] > 0 and s_c == 0) else 0.0
            add_num += added * add_target
            add_p_den += added
            add_r_den += add_target
        keep_p = keep_num / keep_p_den if keep_p_den else 1.0
        keep_r = keep_num / keep_r_den if keep_r_den else 1.0
        keep_f = 1.0 if (keep_p_den == 0 and keep_r_den == 0) else _f1(keep_p, keep_r)
        add_p = add_num / add_p_den if add_p_den else 1.0
        add_r = add_num / add_r_den if add_r_den else 1.0
        add_f = 1.0 if (add_p_den == 0 and add_r_den == 0) else _f1(add_p, add_r)
        del_p = del_num / del_den if del_den else 1.0
        scores.append((keep_f + add_f + del_p) / 3.0)
    return sum(scores) / len(scores)


def distinct_n(corpus: Corpus, n: int) -> float:
    """Unique n-grams divided by total n-gram occurrences, corpus-wide."""
    total = 0
    unique = set()
    for line in corpus:
        grams = _ngrams(line, n)
        total += sum(grams.values())
        unique.update(grams)
    if total == 0:
        raise ContractError(f"corpus contains no n-grams of order {n}")
    return len(unique) / total


class WordDistribution(dict):
    """token -> probability map; values sum to 1."""


def word_distribution(corpus: Corpus) -> WordDistribution:
    counts: Counter = Counter()
    for line in corpus:
        counts.update(line)
    total = sum(counts.values())
    if total == 0:
        raise ContractError("cannot build a word distribution from an empty corpus")
    return WordDistribution({w: c / total for w, c in counts.items()})


def _smoothed_pair(q_i, q_j, epsilon: float):
    vocab = sorted(set(q_i) | set(q_j))
    pi = [q_i.get(w, 0.0) + epsilon for w in vocab]
    pj = [q_j.get(w, 0.0) + epsilon for w in vocab]
    si, sj = sum(pi), sum(pj)
    return [(a / si, b / sj) for a, b in zip(pi, pj)]


def kl_divergence(q_i, q_j, epsilon: float = 1e-10) -> float:
    """KL(Q_i || Q_j) in nats after additive-epsilon smoothing over the
    union vocabulary and renormalization."""
    return sum(a * math.log(a / b) for a, b in _smoothed_pair(q_i, q_j, epsilon))


def jeffreys_divergence(distributions: Sequence[dict], epsilon: float = 1e-10) -> float:
    """Average KL over all ordered pairs of the K distributions."""
    k = len(distributions)
    if k < 2:
        raise ContractError("Jeffrey's Divergence needs at least two distributions")
    total = sum(kl_divergence(distributions[i], distributions[j], epsilon)
                for i in range(k) for j in range(k) if i != j)
    return total / (k * (k - 1))


def jd_word_contributions(distributions: Sequence[dict], top_m: int = 10,
                          epsilon: float = 1e-10) -> list[list[tuple[str, float]]]:
    """Per decoder i, words ranked by their summed outgoing KL terms
    sum_{j != i} Q_i(w) ln(Q_i(w)/Q_j(w)). Ties break lexicographically."""
    k = len(distributions)
    if k < 2:
        raise ContractError("need at least two distributions")
    out = []
    for i in range(k):
        contrib: dict[str, float] = {}
        for j in range(k):
            if j == i:
                continue
            vocab = sorted(set(distributions[i]) | set(distributions[j]))
            for w, (a, b) in zip(vocab, _smoothed_pair(distributions[i],
                                                       distributions[j], epsilon)):
                contrib[w] = contrib.get(w, 0.0) + a * math.log(a / b)
        ranked = sorted(contrib.items(), key=lambda kv: (-kv[1], kv[0]))
        out.append(ranked[:top_m])
    return out


@dataclass
class ConfusionMatrix:
    """K x K grid: entry [i][j] = BLEU of decoder i's outputs against
    reference set j (single reference per line)."""
    scores: list[list[float]]

    def best_assignment(self) -> tuple[list[int], float]:
        """Injective decoder->reference matching maximizing the mean score.

        Exact search over permutations (K is small here). Returns
        (assignment where assignment[i] = matched reference of decoder i,
        mean matched score).
        """
        from itertools import permutations

        k = len(self.scores)
        best: tuple[float, tuple[int, ...]] | None = None
        for perm in permutations(range(k)):
            mean = sum(self.scores[i][perm[i]] for i in range(k)) / k
            if best is None or mean > best[0]:
                best = (mean, perm)
        return list(best[1]), best[0]


def confusion_matrix(output_sets: Sequence[Corpus],
                     reference_sets: Sequence[Corpus]) -> ConfusionMatrix:
    for c in list(output_sets) + list(reference_sets):
        _check_aligned(output_sets[0], c)
    scores = [[multi_ref_bleu(outs, [[r] for r in refs]) for refs in reference_sets]
              for outs in output_sets]
    return ConfusionMatrix(scores=scores)


@dataclass
class LengthReport:
    source_avg: float
    decoder_avg: list[float]
    spread: float  # max - min over decoders


def length_report(sources: Corpus, output_sets: Sequence[Corpus]) -> LengthReport:
    if not sources or not output_sets:
        raise ContractError("length report needs non-empty corpora")
    means = [sum(len(line) for line in outs) / len(outs) for outs in output_sets]
    return LengthReport(source_avg=sum(len(s) for s in sources) / len(sources),
                        decoder_avg=means, spread=max(means) - min(means))
