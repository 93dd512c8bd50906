"""Bidirectional LSTM emotion classifier with additive self-attention pooling.

Trained over the 9 emotion classes; the non-emotion label is never a
logit, it is derived by thresholding the winning probability. Corpus
labeling applies the threshold; response evaluation uses the bare argmax.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError
from .model import LstmCell
from .optim import Adam, clip_grad_norm
from .tensor import Tape, Tensor, backward
from .vocab import (
    EMOTIONS,
    NON_EMOTION_ID,
    NUM_EMOTIONS,
    TOKENIZER_DIGEST,
    Vocabulary,
    tokenize,
)


@dataclass
class EmotionDistribution:
    """Probabilities over the 9 emotions plus the winning class."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (NUM_EMOTIONS,):
            raise ContractError(f"expected {NUM_EMOTIONS} probabilities, got {self.probs.shape}")

    @property
    def top_id(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def top_prob(self) -> float:
        return float(self.probs[self.top_id])


def apply_threshold(dist: EmotionDistribution, theta: float = 0.35) -> int:
    """Resolve a distribution to a label id; low confidence means non-emotion."""
    if not 0.0 <= theta < 1.0:
        raise ContractError(f"threshold {theta} outside [0, 1)")
    if dist.top_prob < theta:
        return NON_EMOTION_ID
    return dist.top_id


class TextClassifier:
    """Forward and backward LSTMs over tokens, attention-pooled into 9 logits."""

    tokenizer_digest = TOKENIZER_DIGEST

    def __init__(self, vocab: Vocabulary, d_c: int, d_w: int, drop_p: float = 0.0,
                 padding: int = 30, seed: int = 0, dtype=np.float64):
        self.vocab = vocab
        self.d_c = d_c
        self.d_w = d_w
        self.drop_p = drop_p
        self.padding = padding
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        v = len(vocab)
        limit = 1.0 / np.sqrt(d_c)
        self.embedding = Tensor(
            rng.uniform(-0.1, 0.1, size=(v, d_w)).astype(self.dtype), requires_grad=True
        )
        self.fw = LstmCell(("x", "h"), (d_w, d_c), d_c, rng, self.dtype)
        self.bw = LstmCell(("x", "h"), (d_w, d_c), d_c, rng, self.dtype)
        self.attn_w1 = T.uniform_param(rng, (2 * d_c, d_c), limit, self.dtype)
        self.attn_w2 = T.uniform_param(rng, (d_c, 1), limit, self.dtype)
        self.out_w = T.uniform_param(rng, (2 * d_c, NUM_EMOTIONS), limit, self.dtype)
        self.out_b = T.zeros(NUM_EMOTIONS, dtype=self.dtype, requires_grad=True)

    def named_parameters(self):
        out = {"embedding": self.embedding}
        out.update(self.fw.named_parameters("fw"))
        out.update(self.bw.named_parameters("bw"))
        out["attn.w1"] = self.attn_w1
        out["attn.w2"] = self.attn_w2
        out["out.w"] = self.out_w
        out["out.b"] = self.out_b
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def _run_direction(self, cell, ids, mask, training, rng):
        b, m = ids.shape
        h = T.zeros((b, self.d_c), dtype=self.dtype)
        c = T.zeros((b, self.d_c), dtype=self.dtype)
        states = []
        for t in range(m):
            x = T.take_rows(self.embedding, ids[:, t])
            x = T.dropout(x, self.drop_p, rng, training)
            h2, c2 = cell.step([x, h], c)
            col = mask[:, t]
            if np.all(col == 1.0):
                h, c = h2, c2
            else:
                mt = Tensor(np.asarray(col, dtype=self.dtype).reshape(b, 1))
                inv = Tensor(np.asarray(1.0 - col, dtype=self.dtype).reshape(b, 1))
                h = T.add(T.mul(h2, mt), T.mul(h, inv))
                c = T.add(T.mul(c2, mt), T.mul(c, inv))
            states.append(h)
        return T.stack_steps(states)

    def logits(self, ids: np.ndarray, mask: np.ndarray, training=False, rng=None,
               return_attention=False):
        """(B, 9) logits; right-padded rows are reversed around their true
        length so the backward pass sees tokens last-to-first."""
        ids = np.asarray(ids)
        b, m = ids.shape
        lengths = np.asarray(mask).sum(axis=1).astype(np.int64)
        if np.any(lengths < 1):
            raise ContractError("classifier input contains an empty row")
        fw_states = self._run_direction(self.fw, ids, mask, training, rng)
        # reverse each row's real tokens, keep the padding at the end
        pos = np.arange(m)[None, :]
        rev_idx = np.where(pos < lengths[:, None], lengths[:, None] - 1 - pos, pos)
        ids_rev = np.take_along_axis(ids, rev_idx, axis=1)
        bw_rev = self._run_direction(self.bw, ids_rev, mask, training, rng)
        bw_states = T.take_along_time(bw_rev, rev_idx)  # realign to forward order
        u = T.concat([fw_states, bw_states], axis=2)  # (B, m, 2*Dc)
        scores = T.reshape(T.matmul(T.tanh(T.matmul(u, self.attn_w1)), self.attn_w2), (b, m))
        if not np.all(mask == 1.0):
            mk = np.asarray(mask, dtype=self.dtype)
            scores = T.add(T.mul(scores, Tensor(mk)), Tensor((1.0 - mk) * T.NEG_MASK))
        alpha = T.softmax(scores, axis=1)
        pooled = T.reshape(T.matmul(T.reshape(alpha, (b, 1, m)), u), (b, 2 * self.d_c))
        pooled = T.dropout(pooled, self.drop_p, rng, training)
        out = T.add(T.matmul(pooled, self.out_w), self.out_b)
        if return_attention:
            return out, alpha
        return out

    def classify(self, text: str) -> EmotionDistribution:
        toks = tokenize(text)[: self.padding]
        if not toks:
            raise ContractError("cannot classify empty text")
        ids = np.asarray([self.vocab.encode(toks)], dtype=np.int64)
        logits = self.logits(ids, np.ones_like(ids, dtype=np.float64))
        probs = T.softmax(logits, axis=1).data[0]
        return EmotionDistribution(probs.astype(np.float64))


@dataclass
class ClassifierMetrics:
    accuracy: float
    precision: float  # macro
    recall: float
    f1: float
    confusion: np.ndarray  # (9, 9) counts, true x predicted


def metrics_from_confusion(confusion: np.ndarray) -> ClassifierMetrics:
    confusion = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(confusion)
    pred = confusion.sum(axis=0)
    true = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(pred > 0, tp / pred, 0.0)
        rec = np.where(true > 0, tp / true, 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    present = true > 0
    return ClassifierMetrics(
        accuracy=float(tp.sum() / max(confusion.sum(), 1.0)),
        precision=float(prec[present].mean()) if present.any() else 0.0,
        recall=float(rec[present].mean()) if present.any() else 0.0,
        f1=float(f1[present].mean()) if present.any() else 0.0,
        confusion=confusion,
    )


def _pad_batch(rows: list[list[int]], pad_to=None):
    n = max(len(r) for r in rows) if pad_to is None else pad_to
    ids = np.zeros((len(rows), n), dtype=np.int64)
    mask = np.zeros((len(rows), n), dtype=np.float64)
    for i, r in enumerate(rows):
        ids[i, : len(r)] = r
        mask[i, : len(r)] = 1.0
    return ids, mask


def train_classifier(samples: list[tuple[str, int]], vocab: Vocabulary, d_c: int = 32,
                     d_w: int = 32, epochs: int = 10, batch_size: int = 16,
                     lr: float = 1e-3, seed: int = 0, drop_p: float = 0.0,
                     holdout: float = 0.1, dtype=np.float32):
    """Train on (text, emotion id) samples; returns (model, held-out metrics).

    Labels must cover at least two of the 9 emotion classes.
    """
    labels = {e for _, e in samples}
    if len(labels) < 2:
        raise ContractError("need at least two emotion classes to train")
    if any(not 0 <= e < NUM_EMOTIONS for e in labels):
        raise ContractError("labels must be the 9 evaluation emotions")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    n_dev = max(1, int(len(samples) * holdout))
    dev = [samples[i] for i in order[:n_dev]]
    train = [samples[i] for i in order[n_dev:]]

    model = TextClassifier(vocab, d_c, d_w, drop_p=drop_p, seed=seed, dtype=dtype)
    opt = Adam(model.parameters(), lr=lr)
    encoded = [(vocab.encode(tokenize(t)[: model.padding]), e) for t, e in train]
    encoded = [(r, e) for r, e in encoded if r]
    for _ in range(epochs):
        idx = rng.permutation(len(encoded))
        for start in range(0, len(encoded), batch_size):
            chunk = [encoded[i] for i in idx[start : start + batch_size]]
            ids, mask = _pad_batch([r for r, _ in chunk])
            y = np.asarray([e for _, e in chunk], dtype=np.int64)
            with Tape():
                logits = model.logits(ids, mask, training=True, rng=rng)
                loss = T.mean_(T.cross_entropy(logits, y))
                backward(loss)
            clip_grad_norm(opt.params, 5.0)
            opt.step()
            opt.zero_grad()

    confusion = np.zeros((NUM_EMOTIONS, NUM_EMOTIONS))
    for text, e in dev:
        dist = model.classify(text)
        confusion[e, dist.top_id] += 1
    return model, metrics_from_confusion(confusion)


def label_corpus(classifier, pairs, theta: float = 0.35):
    """Fill each pair's emotion from its target utterance.

    Returns (labeled pairs, stats) where stats reports the fraction of
    targets whose top probability fell below the threshold.
    """
    below = 0
    labeled = []
    for p in pairs:
        text = " ".join(p.target_tokens)
        dist = classifier.classify(text)
        label = apply_threshold(dist, theta)
        if label == NON_EMOTION_ID:
            below += 1
        q = type(p)(p.source_tokens, p.target_tokens, emotion=label, line_no=p.line_no)
        labeled.append(q)
    stats = {"n": len(labeled), "below_threshold": below,
             "below_fraction": below / len(labeled) if labeled else 0.0}
    return labeled, stats
