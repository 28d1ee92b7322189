import math

import numpy as np
import pytest

from dpage import tensor as T
from dpage.errors import ContractError, DimensionError
from dpage.model import (LSTMCellParams, ModelConfig, Seq2SeqModel, attend,
                         lstm_step)
from dpage.tensor import Tensor
from dpage.vocab import BOS, EOS


def make_cell(input_dim, hidden_dim, seed=0):
    return LSTMCellParams(input_dim, hidden_dim, np.random.default_rng(seed))


def zero_cell(input_dim, hidden_dim):
    cell = make_cell(input_dim, hidden_dim)
    for w in (cell.w_i, cell.w_f, cell.w_o, cell.w_u):
        w.data[:] = 0.0
    return cell


class TestLstmStep:
    def test_zero_weights_zero_cell(self):
        cell = zero_cell(3, 2)
        h, c = lstm_step(cell, Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))),
                         Tensor(np.zeros((1, 3))))
        assert np.array_equal(c.data, np.zeros((1, 2)))
        assert np.array_equal(h.data, np.zeros((1, 2)))

    def test_zero_weights_carries_half_cell(self):
        # gates are sigmoid(0) = 0.5 and u = tanh(0) = 0, so c' = 0.5*c
        cell = zero_cell(3, 2)
        v = np.array([[0.8, -0.4]])
        h, c = lstm_step(cell, Tensor(np.zeros((1, 2))), Tensor(v),
                         Tensor(np.zeros((1, 3))))
        assert np.abs(c.data - 0.5 * v).max() < 1e-15
        assert np.abs(h.data - 0.5 * np.tanh(0.5 * v)).max() < 1e-15

    def test_matches_scalar_reimplementation(self):
        rng = np.random.default_rng(7)
        cell = make_cell(3, 2, seed=7)
        x, h0, c0 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        h, c = lstm_step(cell, Tensor(h0.reshape(1, -1)), Tensor(c0.reshape(1, -1)),
                         Tensor(x.reshape(1, -1)))
        z = list(x) + list(h0) + [1.0]

        def gate(w, fn):
            return [fn(sum(w.data[r, k] * z[k] for k in range(len(z))))
                    for r in range(2)]

        sig = lambda v: 1.0 / (1.0 + math.exp(-v))
        i = gate(cell.w_i, sig)
        f = gate(cell.w_f, sig)
        o = gate(cell.w_o, sig)
        u = gate(cell.w_u, math.tanh)
        c_ref = [f[r] * c0[r] + i[r] * u[r] for r in range(2)]
        h_ref = [o[r] * math.tanh(c_ref[r]) for r in range(2)]
        assert np.abs(c.data[0] - c_ref).max() < 1e-12
        assert np.abs(h.data[0] - h_ref).max() < 1e-12

    def test_dimension_mismatch(self):
        cell = make_cell(3, 2)
        with pytest.raises(DimensionError):
            lstm_step(cell, Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))),
                      Tensor(np.zeros((1, 5))))


class TestEncode:
    def test_length_contract(self, tiny_seq2seq):
        enc = tiny_seq2seq.encode([4])
        assert len(enc.states) == 1

    def test_deterministic(self, tiny_seq2seq):
        a = tiny_seq2seq.encode([4, 5, 6])
        b = tiny_seq2seq.encode([4, 5, 6])
        for s1, s2 in zip(a.states, b.states):
            assert np.array_equal(s1.data, s2.data)

    def test_prefix_property(self, tiny_seq2seq):
        full = tiny_seq2seq.encode([4, 5, 6, 7])
        prefix = tiny_seq2seq.encode([4, 5, 6])
        for s_full, s_pre in zip(full.states[:3], prefix.states):
            assert np.array_equal(s_full.data, s_pre.data)

    def test_out_of_range_id(self, tiny_seq2seq):
        with pytest.raises(ContractError):
            tiny_seq2seq.encode([4, 99])

    def test_empty_source(self, tiny_seq2seq):
        with pytest.raises(ContractError):
            tiny_seq2seq.encode([])


class TestAttend:
    def test_singleton_source(self):
        h = Tensor(np.array([[0.3, -0.2]]))
        state = Tensor(np.array([[1.0, 2.0]]))
        context, weights = attend(h, [state])
        assert np.array_equal(context.data, state.data)
        assert weights.data[0, 0] == 1.0

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(3)
        h = Tensor(rng.uniform(-1, 1, (4, 5)))
        states = [Tensor(rng.uniform(-1, 1, (4, 5))) for _ in range(6)]
        _, weights = attend(h, states)
        assert np.abs(weights.data.sum(axis=1) - 1.0).max() < 1e-12

    def test_equal_scores_give_mean(self):
        # orthogonal states relative to the query -> all scores 0
        h = Tensor(np.array([[1.0, 0.0, 0.0]]))
        states = [Tensor(np.array([[0.0, a, b]]))
                  for a, b in [(1.0, 0.0), (0.0, 1.0), (2.0, 2.0)]]
        context, weights = attend(h, states)
        mean = sum(s.data for s in states) / 3
        assert np.abs(context.data - mean).max() < 1e-12
        assert np.abs(weights.data - 1 / 3).max() < 1e-12

    def test_empty_states(self):
        with pytest.raises(ContractError):
            attend(Tensor(np.zeros((1, 2))), [])


class TestDecodeStep:
    def test_dist_sums_to_one(self, tiny_dpage):
        enc = tiny_dpage.encode([4, 5])
        state = tiny_dpage.initial_decoder_state(enc)
        pattern = T.rows(tiny_dpage.patterns, [0])
        dist, _ = tiny_dpage.decode_step(state, [BOS], pattern, enc)
        assert dist.data.shape == (1, 9)
        assert abs(dist.data.sum() - 1.0) < 1e-12
        assert (dist.data >= 0).all()

    def test_zero_pattern_equals_zeroed_columns(self, tiny_dpage, tiny_seq2seq):
        # copy the non-pattern weights across, zero the pattern columns in
        # the dpage decoder: a zero pattern vector must reproduce the plain
        # model's distribution
        src = [4, 5, 6]
        embed = tiny_dpage.config.embed_dim
        pdim = tiny_dpage.config.pattern_dim
        for name, p in tiny_dpage.parameters().items():
            if name == "patterns":
                continue
            q = tiny_seq2seq.parameters()[name]
            if name.startswith("dec.l0"):
                # dpage layout: [embed | pattern | hidden | bias]
                p.data[:, :embed] = q.data[:, :embed]
                p.data[:, embed:embed + pdim] = 0.0
                p.data[:, embed + pdim:] = q.data[:, embed:]
            else:
                p.data[...] = q.data
        enc_d = tiny_dpage.encode(src)
        enc_s = tiny_seq2seq.encode(src)
        zero_pattern = Tensor(np.zeros((1, pdim)))
        dist_d, _ = tiny_dpage.decode_step(
            tiny_dpage.initial_decoder_state(enc_d), [BOS], zero_pattern, enc_d)
        dist_s, _ = tiny_seq2seq.decode_step(
            tiny_seq2seq.initial_decoder_state(enc_s), [BOS], None, enc_s)
        assert np.abs(dist_d.data - dist_s.data).max() < 1e-12

    def test_distinct_patterns_give_distinct_dists(self, tiny_dpage):
        enc = tiny_dpage.encode([4, 5])
        state = tiny_dpage.initial_decoder_state(enc)
        d0, _ = tiny_dpage.decode_step(state, [BOS], T.rows(tiny_dpage.patterns, [0]), enc)
        d1, _ = tiny_dpage.decode_step(state, [BOS], T.rows(tiny_dpage.patterns, [1]), enc)
        assert np.abs(d0.data - d1.data).sum() > 0

    def test_pattern_dim_mismatch(self, tiny_dpage):
        enc = tiny_dpage.encode([4])
        state = tiny_dpage.initial_decoder_state(enc)
        with pytest.raises(DimensionError):
            tiny_dpage.decode_step(state, [BOS], Tensor(np.zeros((1, 5))), enc)


class TestSequenceNll:
    def test_uniform_model_closed_form(self, tiny_seq2seq):
        # zero output projection -> uniform distribution at every step
        tiny_seq2seq.w_out.data[:] = 0.0
        loss = tiny_seq2seq.sequence_nll([4, 5], [6, 7, 8])
        expected = 4 * math.log(9)  # M + 1 steps, |V| = 9
        assert abs(loss.item() - expected) < 1e-12

    def test_strictly_positive(self, tiny_dpage):
        loss = tiny_dpage.sequence_nll([4, 5, 6], [7, 8], k=1)
        assert loss.item() > 0.0

    def test_deterministic(self, tiny_dpage):
        a = tiny_dpage.sequence_nll([4, 5], [6, 7], k=2).item()
        b = tiny_dpage.sequence_nll([4, 5], [6, 7], k=2).item()
        assert a == b

    def test_empty_inputs(self, tiny_dpage):
        with pytest.raises(ContractError):
            tiny_dpage.sequence_nll([], [4])
        with pytest.raises(ContractError):
            tiny_dpage.sequence_nll([4], [])


class TestGradients:
    def test_one_step_loss_passes_finite_differences(self, tiny_dpage):
        params = tiny_dpage.parameters()

        def build():
            return tiny_dpage.sequence_nll([4, 5, 6], [7], k=1)

        report = T.grad_check(build, params)
        assert report.max_rel_err < 1e-4, report.per_param

    def test_multi_step_loss_close_to_finite_differences(self, tiny_dpage):
        # deeper graphs accumulate finite-difference truncation error, so
        # the bound is looser than the single-step check above
        params = tiny_dpage.parameters()

        def build():
            return tiny_dpage.sequence_nll([4, 5, 6], [7, 8], k=1)

        report = T.grad_check(build, params, tolerance=5e-4)
        assert report.max_rel_err < 5e-4, report.per_param

    def test_lstm_step_gradients(self):
        cell = make_cell(3, 2, seed=5)
        x = Tensor(np.random.default_rng(1).uniform(-1, 1, (1, 3)))

        def build():
            h, c = lstm_step(cell, Tensor(np.zeros((1, 2))),
                             Tensor(np.zeros((1, 2))), x)
            return T.tsum(T.mul(h, h))

        report = T.grad_check(build, cell.named("cell"))
        assert report.max_rel_err < 1e-4
