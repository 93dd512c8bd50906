import numpy as np
import pytest

import emoseq.variants as variants_mod
from conftest import check_grads
from emoseq import tensor as T
from emoseq.corpus import DialoguePair, TextPair
from emoseq.errors import ContractError
from emoseq.model import BaselineModel
from emoseq.tensor import Tape, Tensor, backward
from emoseq.training import make_batch
from emoseq.variants import (
    VARIANT_TAGS,
    VariantModel,
    allocated_extra_params,
    apply_enc_token,
    count_extra_params,
    decstart_first_input,
    dectrans_logits,
    encatt_attention,
    neutralize_emotion_params,
)
from emoseq.vocab import BOS, Vocabulary, build_vocab, tokenize

WORDS = "alpha beta gamma delta epsilon zeta eta theta"


@pytest.fixture
def vocab():
    return build_vocab([TextPair(tokenize(WORDS), [], None)], cap=100)


def _variant(tag, vocab, d=8, d_w=5, seed=0, **kw):
    return VariantModel(tag, vocab, d=d, d_w=d_w, seed=seed, **kw)


def _baseline(vocab, d=8, d_w=5, seed=0, **kw):
    return BaselineModel(vocab, d=d, d_w=d_w, seed=seed, **kw)


class TestEncToken:
    def test_prepend(self, vocab):
        out = apply_enc_token([20, 21], 3, "before", vocab)
        assert out == [vocab.emotion_token_id(3), 20, 21]

    def test_append(self, vocab):
        out = apply_enc_token([20, 21], 3, "after", vocab)
        assert out == [20, 21, vocab.emotion_token_id(3)]

    def test_full_source_truncates_last_token(self, vocab):
        X = list(range(20, 50))
        before = variants_mod.TRUNCATION_COUNT
        with pytest.warns(UserWarning):
            out = apply_enc_token(X, 0, "after", vocab, padding=30)
        assert len(out) == 30
        assert out[-1] == vocab.emotion_token_id(0)
        assert out[:-1] == X[:29]
        assert variants_mod.TRUNCATION_COUNT == before + 1

    def test_double_application_rejected(self, vocab):
        out = apply_enc_token([20, 21], 3, "before", vocab)
        with pytest.raises(ContractError):
            apply_enc_token(out, 3, "before", vocab)


class TestDecStart:
    def test_token_lookup(self, vocab):
        assert decstart_first_input(3, vocab) == vocab.emotion_token_id(3)

    def test_reduces_to_baseline_when_token_embeds_like_start(self, vocab):
        base = _baseline(vocab, seed=1)
        var = _variant("dec-start", vocab, seed=2)
        neutralize_emotion_params(var, base)
        X = vocab.encode(["alpha", "beta", "gamma"])
        out_b, _ = base.greedy(X)
        out_v, _ = var.greedy(X, e=4)
        enc_b, enc_v = base.encode(X), var.encode(X, 4)
        _, lb, _, _ = base.decode_step(BOS, base.initial_state(enc_b), enc_b)
        _, lv, _, _ = var.decode_step(var.start_token_ids(np.array([4]), 1)[0],
                                      var.initial_state(enc_v), enc_v, e=4)
        assert np.array_equal(lb.data, lv.data)
        assert out_b == out_v

    def test_different_emotions_differ_when_embeddings_differ(self, vocab):
        var = _variant("dec-start", vocab, seed=3)
        X = vocab.encode(["alpha", "beta"])
        enc = var.encode(X, 0)
        hs = []
        for e in (0, 5):
            h, _, _, _ = var.decode_step(var.start_token_ids(np.array([e]), 1)[0],
                                         var.initial_state(enc), enc, e=e)
            hs.append(h.data.copy())
        assert not np.allclose(hs[0], hs[1])


class TestDecRep:
    def test_zero_vector_reduces_to_baseline(self, vocab):
        base = _baseline(vocab, seed=4)
        var = _variant("dec-rep", vocab, seed=5)
        neutralize_emotion_params(var, base)
        X = vocab.encode(["alpha", "beta", "gamma"])
        for e in range(3):
            out_b, _ = base.greedy(X)
            out_v, _ = var.greedy(X, e=e)
            assert out_b == out_v

    def test_identical_vectors_identical_outputs(self, vocab):
        var = _variant("dec-rep", vocab, seed=6)
        var.emo_v.data = np.tile(var.emo_v.data[0], (var.s, 1))
        X = vocab.encode(["alpha", "beta"])
        outs = {tuple(var.greedy(X, e=e)[0]) for e in range(9)}
        assert len(outs) == 1

    def test_gradient_reaches_emotion_vector(self, vocab):
        var = _variant("dec-rep", vocab, seed=7, dtype=np.float64)
        pair = DialoguePair(vocab.encode(["alpha", "beta"]), vocab.encode(["gamma"]), emotion=2)
        batch = make_batch([pair])
        with Tape():
            loss = var.batch_loss(batch.src, batch.src_mask, batch.tgt, batch.tgt_mask,
                                  e_ids=batch.e_ids)
            backward(loss)
        g = var.emo_v.grad
        assert g is not None
        assert np.abs(g[2]).max() > 0
        assert np.abs(np.delete(g, 2, axis=0)).max() == 0  # only the used emotion

    def test_fd_gradient_on_emotion_vector(self, vocab):
        var = _variant("dec-rep", vocab, seed=8, dtype=np.float64)
        pair = DialoguePair(vocab.encode(["alpha", "beta"]), vocab.encode(["gamma", "delta"]), emotion=1)
        batch = make_batch([pair])

        def loss():
            return var.batch_loss(batch.src, batch.src_mask, batch.tgt, batch.tgt_mask,
                                  e_ids=batch.e_ids)

        check_grads(loss, [var.emo_v], tol=1e-6)


class TestDecTrans:
    def test_identity_transform_reduces_to_baseline(self, vocab):
        base = _baseline(vocab, seed=9)
        var = _variant("dec-trans", vocab, seed=10)
        neutralize_emotion_params(var, base)
        h = Tensor(np.random.default_rng(0).normal(size=8))
        enc = base.encode(vocab.encode(["alpha"]))
        logits_b = base.project(T.reshape(h, (1, 8)), None)
        logits_v = dectrans_logits(var, h, e=3)
        assert np.array_equal(logits_b.data[0], logits_v.data)

    def test_zero_transform_gives_bias(self, vocab):
        var = _variant("dec-trans", vocab, seed=11)
        var.emo_trans.data = np.zeros_like(var.emo_trans.data)
        var.proj_b.data = np.random.default_rng(1).normal(size=var.proj_b.shape)
        h = Tensor(np.random.default_rng(2).normal(size=8))
        logits = dectrans_logits(var, h, e=0)
        assert np.allclose(logits.data, var.proj_b.data)

    def test_distinct_transforms_change_argmax_somewhere(self, vocab):
        var = _variant("dec-trans", vocab, seed=12)
        rng = np.random.default_rng(3)
        var.emo_trans.data = rng.normal(size=var.emo_trans.shape)
        hits = 0
        for _ in range(20):
            h = Tensor(rng.normal(size=8))
            a = int(np.argmax(dectrans_logits(var, h, 0).data))
            b = int(np.argmax(dectrans_logits(var, h, 1).data))
            hits += a != b
        assert hits > 0


class TestDecProj:
    def test_identical_layers_identical_outputs(self, vocab):
        var = _variant("dec-proj", vocab, seed=13)
        h = Tensor(np.random.default_rng(4).normal(size=8))
        logits = [dectrans_logits(var, h, e).data for e in range(9)]
        for l in logits[1:]:
            assert np.array_equal(logits[0], l)

    def test_gradient_touches_only_instructed_emotion(self, vocab):
        var = _variant("dec-proj", vocab, seed=14, dtype=np.float64)
        pair = DialoguePair(vocab.encode(["alpha", "beta"]), vocab.encode(["gamma"]), emotion=5)
        batch = make_batch([pair])
        with Tape():
            loss = var.batch_loss(batch.src, batch.src_mask, batch.tgt, batch.tgt_mask,
                                  e_ids=batch.e_ids)
            backward(loss)
        gw = var.emo_proj_w.grad
        gb = var.emo_proj_b.grad
        assert np.abs(gw[5]).max() > 0 and np.abs(gb[5]).max() > 0
        assert np.abs(np.delete(gw, 5, axis=0)).max() == 0
        assert np.abs(np.delete(gb, 5, axis=0)).max() == 0

    def test_reduces_to_baseline_with_copied_projections(self, vocab):
        base = _baseline(vocab, seed=15)
        var = _variant("dec-proj", vocab, seed=16)
        neutralize_emotion_params(var, base)
        X = vocab.encode(["alpha", "beta", "gamma"])
        for e in (0, 4, 8):
            assert base.greedy(X)[0] == var.greedy(X, e=e)[0]


class TestEncAtt:
    def test_shared_matrix_reduces_to_baseline(self, vocab):
        base = _baseline(vocab, seed=17)
        var = _variant("enc-att", vocab, seed=18)
        neutralize_emotion_params(var, base)
        X = vocab.encode(["alpha", "beta", "gamma"])
        for e in range(3):
            assert base.greedy(X)[0] == var.greedy(X, e=e)[0]

    def test_weights_sum_to_one_for_every_emotion(self, vocab):
        var = _variant("enc-att", vocab, seed=19)
        X = vocab.encode(["alpha", "beta", "gamma", "delta"])
        enc = var.encode(X, 0)
        h = Tensor(np.random.default_rng(5).normal(size=8))
        for e in range(var.s - 1):
            alpha, _ = encatt_attention(var, h, enc, e)
            assert abs(float(alpha.data.sum()) - 1.0) < 1e-12

    def test_distinct_matrices_distinct_weights(self, vocab):
        var = _variant("enc-att", vocab, seed=20)
        X = vocab.encode(["alpha", "beta", "gamma", "delta"])
        enc = var.encode(X, 0)
        h = Tensor(np.random.default_rng(6).normal(size=8))
        a0, _ = encatt_attention(var, h, enc, 0)
        a1, _ = encatt_attention(var, h, enc, 1)
        assert not np.allclose(a0.data, a1.data)


class TestReductionIdentities:
    @pytest.mark.parametrize("tag", VARIANT_TAGS)
    def test_neutral_variant_matches_baseline_bitwise(self, tag, vocab):
        base = _baseline(vocab, seed=21)
        var = _variant(tag, vocab, seed=22)
        neutralize_emotion_params(var, base)
        rng = np.random.default_rng(23)
        for trial in range(10):
            m = int(rng.integers(1, 6))
            X = [int(rng.integers(14, len(vocab))) for _ in range(m)]
            e = int(rng.integers(0, 9))
            if tag == "enc-bef":
                ref = base.greedy([vocab.emotion_token_id(e)] + X)
            elif tag == "enc-aft":
                ref = base.greedy(X + [vocab.emotion_token_id(e)])
            else:
                ref = base.greedy(X)
            out = var.greedy(X, e=e)
            assert ref[0] == out[0]
            assert all(np.array_equal(a, b) for a, b in zip(ref[1], out[1]))


class TestParamAccounting:
    DIMS = {"D": 600, "V": 25_000, "m": 30, "S": 10}

    def test_published_table_reproduced_exactly(self):
        expected = {
            "enc-bef": 0,
            "enc-aft": 0,
            "dec-rep": 6_000,
            "dec-start": 0,
            "dec-trans": 3_600_000,
            "dec-proj": 150_000_000,
            "enc-att": 180_000,
        }
        for tag, want in expected.items():
            assert count_extra_params(tag, self.DIMS, "paper") == want

    def test_actual_mode_matches_allocation(self, vocab):
        dims = {"D": 8, "V": len(vocab), "m": 5, "S": 10}
        for tag in VARIANT_TAGS:
            var = _variant(tag, vocab, d=8, d_w=5)
            assert count_extra_params(tag, dims, "actual") == allocated_extra_params(var)

    def test_actual_enc_att_is_square_per_emotion(self):
        assert count_extra_params("enc-att", self.DIMS, "actual") == 3_600_000

    def test_bad_mode_rejected(self):
        with pytest.raises(ContractError):
            count_extra_params("enc-att", self.DIMS, "typo")

    def test_bad_tag_rejected(self):
        with pytest.raises(ContractError):
            count_extra_params("enc-mid", self.DIMS, "paper")


class TestEmotionGradients:
    @pytest.mark.parametrize("tag", ["dec-trans", "enc-att"])
    def test_emotion_parameter_fd(self, tag, vocab):
        var = _variant(tag, vocab, seed=24, dtype=np.float64)
        pair = DialoguePair(vocab.encode(["alpha", "beta"]), vocab.encode(["gamma", "delta"]), emotion=3)
        batch = make_batch([pair])
        param = var.emo_trans if tag == "dec-trans" else var.emo_att_w

        def loss():
            return var.batch_loss(batch.src, batch.src_mask, batch.tgt, batch.tgt_mask,
                                  e_ids=batch.e_ids)

        check_grads(loss, [param], tol=1e-6)

    def test_variant_requires_emotion(self, vocab):
        var = _variant("dec-rep", vocab, seed=25)
        with pytest.raises(ContractError):
            var.greedy(vocab.encode(["alpha"]), e=None)
