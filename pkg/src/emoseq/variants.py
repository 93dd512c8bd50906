"""The seven emotion-injection mechanisms over the baseline seq2seq model.

Injection points:
  enc-bef / enc-aft  prepend / append an emotion token to the source
  dec-start          replace the decoder start token with the emotion token
  dec-rep            per-step trainable emotion vector on the decoder's
                     recurrent input channel
  dec-trans          per-emotion linear transform of the decoder hidden
                     state before the shared projection
  dec-proj           fully separate projection layer per emotion
  enc-att            per-emotion attention matrix

Every mechanism that consumes the instructed emotion reports through the
emotion-use tap, which lets tests assert the trainer itself never reads
emotion labels directly.
"""
from __future__ import annotations

import warnings

import numpy as np

from . import tensor as T
from .errors import ContractError
from .model import BaselineModel, EncoderOutput
from .tensor import Tensor
from .vocab import NUM_EMOTION_SLOTS, Vocabulary

VARIANT_TAGS = ("enc-bef", "enc-aft", "dec-rep", "dec-start", "dec-trans", "dec-proj", "enc-att")

# Callable hook. Installed by tests; receives the injection-site tag each
# time emotion ids are consumed by a mechanism.
_EMOTION_TAP = None

# Counts sources truncated to make room for an injected emotion token.
TRUNCATION_COUNT = 0


def set_emotion_tap(fn):
    global _EMOTION_TAP
    _EMOTION_TAP = fn


def _tap(site: str):
    if _EMOTION_TAP is not None:
        _EMOTION_TAP(site)


def apply_enc_token(X: list[int], e: int, position: str, vocab: Vocabulary,
                    padding: int = 30) -> list[int]:
    """Rewrite the source with the emotion token before or after it.

    A full-length source loses its last content token to stay within the
    padding length. Applying this twice is a pipeline bug, so an already
    augmented source is rejected.
    """
    if position not in ("before", "after"):
        raise ContractError(f"position must be before/after, got {position!r}")
    if X and (vocab.is_emotion_token_id(X[0]) or vocab.is_emotion_token_id(X[-1])):
        raise ContractError("source already carries an emotion token")
    global TRUNCATION_COUNT
    X = list(X)
    if len(X) >= padding:
        X = X[: padding - 1]
        TRUNCATION_COUNT += 1
        warnings.warn("source truncated to make room for the emotion token")
    t_e = vocab.emotion_token_id(e)
    return [t_e] + X if position == "before" else X + [t_e]


def decstart_first_input(e: int, vocab: Vocabulary) -> int:
    """Token id fed to the decoder at step one instead of the start token."""
    return vocab.emotion_token_id(e)


class VariantModel(BaselineModel):
    """Baseline parameters plus exactly the extra tensors its tag implies."""

    def __init__(self, tag: str, vocab: Vocabulary, d: int, d_w: int,
                 drop_p: float = 0.0, padding: int = 30, seed: int = 0,
                 dtype=np.float64, s: int = NUM_EMOTION_SLOTS):
        if tag not in VARIANT_TAGS:
            raise ContractError(f"unknown variant tag {tag!r}")
        self.tag = tag
        self.s = s
        super().__init__(vocab, d, d_w, drop_p=drop_p, padding=padding, seed=seed, dtype=dtype)

    # ----- construction -------------------------------------------------------

    def extra_recurrent_dims(self):
        return (self.d,) if self.tag == "dec-rep" else ()

    def _init_emotion_params(self, rng):
        d, s = self.d, self.s
        v = len(self.vocab)
        limit = 1.0 / np.sqrt(d)
        if self.tag == "dec-rep":
            self.emo_v = Tensor(
                rng.uniform(-limit, limit, size=(s, d)).astype(self.dtype), requires_grad=True
            )
        elif self.tag == "dec-trans":
            eye = np.eye(d)
            stack = np.stack([eye + rng.normal(0.0, 1e-3, size=(d, d)) for _ in range(s)])
            self.emo_trans = Tensor(stack.astype(self.dtype), requires_grad=True)
        elif self.tag == "dec-proj":
            draw = rng.uniform(-limit, limit, size=(d, v))
            self.emo_proj_w = Tensor(
                np.repeat(draw[None, :, :], s, axis=0).astype(self.dtype), requires_grad=True
            )
            self.emo_proj_b = T.zeros((s, v), dtype=self.dtype, requires_grad=True)
        elif self.tag == "enc-att":
            stack = rng.uniform(-limit, limit, size=(s, d, d))
            self.emo_att_w = Tensor(stack.astype(self.dtype), requires_grad=True)

    def named_parameters(self):
        out = super().named_parameters()
        if self.tag == "dec-rep":
            out["emotion.v"] = self.emo_v
        elif self.tag == "dec-trans":
            out["emotion.trans"] = self.emo_trans
        elif self.tag == "dec-proj":
            out["emotion.proj.w"] = self.emo_proj_w
            out["emotion.proj.b"] = self.emo_proj_b
        elif self.tag == "enc-att":
            out["emotion.att.w"] = self.emo_att_w
        return out

    # ----- injection hooks ----------------------------------------------------

    def _need_e(self, e_ids):
        if e_ids is None:
            raise ContractError(f"variant {self.tag} requires an emotion")
        return np.asarray(e_ids, dtype=np.int64)

    def source_ids(self, X, e):
        if self.tag in ("enc-bef", "enc-aft"):
            if e is None:
                raise ContractError(f"variant {self.tag} requires an emotion")
            _tap(self.tag)
            pos = "before" if self.tag == "enc-bef" else "after"
            return apply_enc_token(X, e, pos, self.vocab, self.padding)
        return list(X)

    def start_token_ids(self, e_ids, batch):
        if self.tag == "dec-start":
            e_ids = self._need_e(e_ids)
            _tap(self.tag)
            return np.asarray([self.vocab.emotion_token_id(int(e)) for e in e_ids], dtype=np.int64)
        return super().start_token_ids(e_ids, batch)

    def extra_recurrent_inputs(self, e_ids):
        if self.tag == "dec-rep":
            e_ids = self._need_e(e_ids)
            _tap(self.tag)
            return [T.take_rows(self.emo_v, e_ids)]
        return []

    def attention_keys(self, enc: EncoderOutput, e_ids):
        if self.tag == "enc-att":
            e_ids = self._need_e(e_ids)
            _tap(self.tag)
            w = T.take_rows(self.emo_att_w, e_ids)
            return T.tanh(T.matmul(enc.states, w))
        return super().attention_keys(enc, e_ids)

    def project(self, h_de, e_ids, training=False, rng=None):
        if self.tag == "dec-trans":
            e_ids = self._need_e(e_ids)
            _tap(self.tag)
            b = h_de.shape[0]
            dh = T.dropout(h_de, self.drop_p, rng, training)
            tr = T.take_rows(self.emo_trans, e_ids)
            h2 = T.reshape(T.matmul(T.reshape(dh, (b, 1, self.d)), tr), (b, self.d))
            return T.add(T.matmul(h2, self.proj_w), self.proj_b)
        if self.tag == "dec-proj":
            e_ids = self._need_e(e_ids)
            _tap(self.tag)
            b = h_de.shape[0]
            dh = T.dropout(h_de, self.drop_p, rng, training)
            w = T.take_rows(self.emo_proj_w, e_ids)
            bias = T.take_rows(self.emo_proj_b, e_ids)
            logits = T.reshape(T.matmul(T.reshape(dh, (b, 1, self.d)), w), (b, len(self.vocab)))
            return T.add(logits, bias)
        return super().project(h_de, e_ids, training, rng)


def dectrans_logits(model: VariantModel, h_de: Tensor, e: int) -> Tensor:
    """Logits for one decoder hidden state under the per-emotion transform."""
    out = model.project(T.reshape(h_de, (1, model.d)), np.asarray([e], dtype=np.int64))
    return T.reshape(out, (len(model.vocab),))


def decproj_logits(model: VariantModel, h_de: Tensor, e: int) -> Tensor:
    """Logits for one decoder hidden state under the per-emotion projection."""
    out = model.project(T.reshape(h_de, (1, model.d)), np.asarray([e], dtype=np.int64))
    return T.reshape(out, (len(model.vocab),))


def encatt_attention(model: VariantModel, h_de: Tensor, enc: EncoderOutput, e: int):
    """Attention with the emotion's own score matrix; same contract as
    the baseline attention."""
    e_ids = np.asarray([e], dtype=np.int64)
    keys = model.attention_keys(enc, e_ids)
    alpha, h_hat = model.attend(keys, enc, T.reshape(h_de, (1, model.d)))
    return T.reshape(alpha, (enc.m,)), T.reshape(h_hat, (model.d,))


# ---------------------------------------------------------------------------
# parameter accounting


def count_extra_params(tag: str, dims: dict, mode: str = "paper") -> int:
    """Parameters a variant adds on top of the shared baseline bundle.

    ``paper`` mode reproduces the published closed-form accounting
    (enc-att is quoted there as m*D*S). ``actual`` mode sums the
    per-emotion tensors a constructed model allocates: biases are
    included for dec-proj, and enc-att matrices are D x D each since
    they must compose with both decoder and encoder states.
    """
    if tag not in VARIANT_TAGS:
        raise ContractError(f"unknown variant tag {tag!r}")
    d, v, m, s = (int(dims[k]) for k in ("D", "V", "m", "S"))
    if min(d, v, m, s) <= 0:
        raise ContractError("dims must be positive")
    if mode == "paper":
        return {
            "enc-bef": 0,
            "enc-aft": 0,
            "dec-rep": d * s,
            "dec-start": 0,
            "dec-trans": d * d * s,
            "dec-proj": v * d * s,
            "enc-att": m * d * s,
        }[tag]
    if mode == "actual":
        return {
            "enc-bef": 0,
            "enc-aft": 0,
            "dec-rep": s * d,
            "dec-start": 0,
            "dec-trans": s * d * d,
            "dec-proj": s * d * v + s * v,
            "enc-att": s * d * d,
        }[tag]
    raise ContractError(f"unknown accounting mode {mode!r}")


def allocated_extra_params(model: VariantModel) -> int:
    """Enumerate the per-emotion tensors actually allocated by a model."""
    return sum(p.size for name, p in model.named_parameters().items() if name.startswith("emotion."))


def neutralize_emotion_params(variant: VariantModel, baseline: BaselineModel) -> None:
    """Copy the baseline's weights into a variant and zero out its emotion
    information, so its outputs must reduce to the baseline's exactly.

    dec-rep gets zero emotion vectors (the widened gate rows contribute
    exact zeros); dec-trans identity transforms; dec-proj/enc-att copies of
    the shared layer; token-injection variants get the start token's
    embedding row copied over every emotion token row.
    """
    base = baseline.named_parameters()
    for name, p in variant.named_parameters().items():
        if name in base:
            p.data = base[name].data.copy()
    d, s = variant.d, variant.s
    if variant.tag == "dec-rep":
        variant.emo_v.data = np.zeros_like(variant.emo_v.data)
    elif variant.tag == "dec-trans":
        variant.emo_trans.data = np.repeat(np.eye(d, dtype=variant.dtype)[None], s, axis=0)
    elif variant.tag == "dec-proj":
        variant.emo_proj_w.data = np.repeat(baseline.proj_w.data[None], s, axis=0).copy()
        variant.emo_proj_b.data = np.repeat(baseline.proj_b.data[None], s, axis=0).copy()
    elif variant.tag == "enc-att":
        variant.emo_att_w.data = np.repeat(baseline.att_w.data[None], s, axis=0).copy()
    if variant.tag in ("enc-bef", "enc-aft", "dec-start"):
        from .vocab import BOS, EMOTION_TOKEN_OFFSET

        # both models get the rewrite: greedy feedback may re-consume an
        # emitted emotion token, so the tables must agree row for row
        for emb in (variant.embedding.data, baseline.embedding.data):
            for i in range(s):
                emb[EMOTION_TOKEN_OFFSET + i] = emb[BOS]
