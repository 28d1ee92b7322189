import itertools
import math

import numpy as np
import pytest

from dpage import tensor as T
from dpage.decoding import (DecodeConfig, Hypothesis, beam_search,
                            beam_topk_decode, dpage_decode_k, greedy_decode,
                            noise_decode_k, vae_decode_k)
from dpage.errors import ConfigError, ContractError
from dpage.model import DecoderState, ModelConfig, Seq2SeqModel
from dpage.vocab import BOS, EOS, PAD


def enumerate_all(model, source, max_len):
    """Score every emittable sequence up to max_len by teacher forcing.

    The search space excludes PAD and BOS; every sequence ends in EOS
    (forced at max_len). Returns the same ordering the beam promises.
    """
    tokens = [t for t in range(model.config.vocab_size) if t not in (PAD, BOS, EOS)]
    out = []
    with T.no_grad():
        enc = model.encode(source)
        for length in range(max_len + 1):
            for body in itertools.product(tokens, repeat=length):
                state = DecoderState(layers=list(enc.finals), t=0)
                score = 0.0
                prev = BOS
                for tok in body + (EOS,):
                    dist, state = model.decode_step(state, [prev], None, enc)
                    score += math.log(dist.data[0, tok])
                    prev = tok
                out.append(Hypothesis(body + (EOS,), score, True))
    return sorted(out, key=lambda h: (-h.logprob, h.ids))


@pytest.fixture
def small_model():
    # vocab 6 -> 3 emittable tokens; max_len 3 -> 1 + 3 + 9 + 27 = 40 sequences
    return Seq2SeqModel(ModelConfig(vocab_size=6, embed_dim=3, hidden_dim=4,
                                    pattern_dim=2, seed=13), mode="seq2seq")


class TestBeamVsExhaustive:
    @pytest.mark.parametrize("seed", range(5))
    def test_wide_beam_matches_enumeration(self, seed):
        model = Seq2SeqModel(ModelConfig(vocab_size=6, embed_dim=3, hidden_dim=4,
                                         pattern_dim=2, seed=seed), mode="seq2seq")
        truth = enumerate_all(model, [4, 5], max_len=3)
        found = beam_search(model, [4, 5], beam_size=64, max_len=3)
        assert len(found) == len(truth) == 40
        for a, b in zip(found, truth):
            assert a.ids == b.ids
            assert abs(a.logprob - b.logprob) < 1e-9

    def test_narrow_beam_top1_never_beats_enumeration(self, small_model):
        truth = enumerate_all(small_model, [4], max_len=3)
        found = beam_search(small_model, [4], beam_size=2, max_len=3)
        assert found[0].logprob <= truth[0].logprob + 1e-12


class TestBeamBasics:
    def test_beam_one_equals_greedy(self):
        for seed in range(20):
            model = Seq2SeqModel(ModelConfig(vocab_size=8, embed_dim=3,
                                             hidden_dim=4, pattern_dim=2,
                                             seed=seed), mode="seq2seq")
            g = greedy_decode(model, [4, 5, 6], max_len=8)
            b = beam_search(model, [4, 5, 6], beam_size=1, max_len=8)[0]
            assert g.ids == b.ids
            assert abs(g.logprob - b.logprob) < 1e-12

    def test_no_duplicates_and_sorted(self, small_model):
        hyps = beam_search(small_model, [4, 5], beam_size=16, max_len=4)
        ids = [h.ids for h in hyps]
        assert len(ids) == len(set(ids))
        scores = [h.logprob for h in hyps]
        assert scores == sorted(scores, reverse=True)

    def test_never_emits_pad_or_bos(self, small_model):
        for h in beam_search(small_model, [4], beam_size=8, max_len=5):
            assert PAD not in h.ids
            assert BOS not in h.ids
            assert h.ids[-1] == EOS

    def test_respects_max_len(self, small_model):
        for h in beam_search(small_model, [4], beam_size=8, max_len=2):
            assert len(h.output_ids) <= 2

    def test_bad_args(self, small_model):
        with pytest.raises(ConfigError):
            beam_search(small_model, [4], beam_size=0)
        with pytest.raises(ConfigError):
            beam_search(small_model, [4], beam_size=2, max_len=0)


class TestKDecoders:
    def test_dpage_returns_k_hypotheses(self, tiny_dpage):
        hyps = dpage_decode_k(tiny_dpage, [4, 5], beam_size=3, max_len=5)
        assert len(hyps) == tiny_dpage.config.k
        assert all(h.finished for h in hyps)

    def test_dpage_rejects_other_modes(self, tiny_seq2seq):
        with pytest.raises(ContractError):
            dpage_decode_k(tiny_seq2seq, [4, 5])

    def test_beam_topk_count_and_validation(self, small_model):
        hyps = beam_topk_decode(small_model, [4, 5], beam_size=8, top_k=4, max_len=4)
        assert len(hyps) == 4
        with pytest.raises(ConfigError):
            beam_topk_decode(small_model, [4], beam_size=2, top_k=3)

    def test_noise_decode_deterministic_per_seed(self, tiny_config):
        model = Seq2SeqModel(tiny_config, mode="noise")
        a = noise_decode_k(model, [4, 5], beam_size=2, k=3, seed=9, max_len=5)
        b = noise_decode_k(model, [4, 5], beam_size=2, k=3, seed=9, max_len=5)
        assert [h.ids for h in a] == [h.ids for h in b]
        with pytest.raises(ContractError):
            noise_decode_k(Seq2SeqModel(tiny_config, mode="vae"), [4], 2, 3, 0)

    def test_vae_decode_returns_k(self, tiny_config):
        model = Seq2SeqModel(tiny_config, mode="vae")
        hyps = vae_decode_k(model, [4, 5], beam_size=2, k=3, seed=9, max_len=5)
        assert len(hyps) == 3
        with pytest.raises(ContractError):
            vae_decode_k(Seq2SeqModel(tiny_config, mode="noise"), [4], 2, 3, 0)


class TestDecodeConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            DecodeConfig(mode="nope")
        with pytest.raises(ConfigError):
            DecodeConfig(mode="beam", beam_size=2, top_k=5)
        with pytest.raises(ConfigError):
            DecodeConfig(max_len=0)


class TestHypothesis:
    def test_output_ids_strip_eos(self):
        h = Hypothesis((4, 5, EOS), -1.0, True)
        assert h.output_ids == (4, 5)
