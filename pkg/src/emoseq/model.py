"""LSTM encoder-decoder with global attention over encoder states.

The decoder is wired so the attended context vector itself becomes the
next step's recurrent hidden input, and the first decoder state is the
encoder's final (h, c). All forward code is batched; single-sequence
entry points wrap a batch of one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .tensor import Tensor
from .vocab import BOS, EOS, PAD, TOKENIZER_DIGEST, Vocabulary, tokenize

GATES = ("i", "f", "o", "g")


class LstmCell:
    """One LSTM cell whose gate weights are partitioned by input block.

    ``block_dims`` lists the widths of the concatenated gate inputs (the
    token embedding first, then one or more recurrent channels); keeping
    the blocks as separate matrices lets wider variants share this code.
    """

    def __init__(self, block_names, block_dims, d, rng, dtype):
        if len(block_names) != len(block_dims):
            raise ContractError("block names/dims mismatch")
        self.block_names = tuple(block_names)
        self.block_dims = tuple(int(b) for b in block_dims)
        self.d = int(d)
        limit = 1.0 / np.sqrt(d)
        self.w = {
            gate: [T.uniform_param(rng, (bd, d), limit, dtype) for bd in self.block_dims]
            for gate in GATES
        }
        self.b = {gate: T.zeros(d, dtype=dtype, requires_grad=True) for gate in GATES}

    def step(self, inputs, c):
        """Advance one step. inputs: list of (B, block_dim); c: (B, d)."""
        if len(inputs) != len(self.block_dims):
            raise ShapeError(f"expected {len(self.block_dims)} input blocks, got {len(inputs)}")
        for x, bd in zip(inputs, self.block_dims):
            if x.shape[-1] != bd:
                raise ShapeError(f"input block width {x.shape[-1]} != {bd}")
        acts = {}
        for gate in GATES:
            a = None
            for x, w in zip(inputs, self.w[gate]):
                term = T.matmul(x, w)
                a = term if a is None else T.add(a, term)
            acts[gate] = T.add(a, self.b[gate])
        i = T.sigmoid(acts["i"])
        f = T.sigmoid(acts["f"])
        o = T.sigmoid(acts["o"])
        g = T.tanh(acts["g"])
        c2 = T.add(T.mul(f, c), T.mul(i, g))
        h2 = T.mul(o, T.tanh(c2))
        return h2, c2

    def named_parameters(self, prefix):
        out = {}
        for gate in GATES:
            for name, w in zip(self.block_names, self.w[gate]):
                out[f"{prefix}.{gate}.w_{name}"] = w
            out[f"{prefix}.{gate}.b"] = self.b[gate]
        return out


def lstm_cell(cell: LstmCell, inputs, state):
    """Single-sequence cell step: 1-D input blocks plus the (h, c) state.

    The state's hidden vector is fed as the cell's recurrent input block.
    """
    h, c = state
    ins = [T.reshape(x, (1, x.shape[-1])) for x in list(inputs) + [h]]
    h2, c2 = cell.step(ins, T.reshape(c, (1, c.shape[-1])))
    return T.reshape(h2, (cell.d,)), T.reshape(c2, (cell.d,))


@dataclass
class EncoderOutput:
    """All encoder hidden states plus the final (h, c), with the source mask."""

    states: Tensor  # (B, m, D)
    h_final: Tensor  # (B, D)
    c_final: Tensor  # (B, D)
    mask: np.ndarray  # (B, m) of 0/1 floats

    @property
    def m(self):
        return self.states.shape[1]


@dataclass
class DecoderState:
    """Carries the attended vector and cell state between decode steps."""

    h_hat: Tensor  # (B, D)
    c: Tensor  # (B, D)
    step: int = 0


@dataclass
class AttentionTrace:
    """Per-step attention rows recorded while decoding one response."""

    source_tokens: list[str]
    output_tokens: list[str]
    matrix: np.ndarray  # (n_out, m)
    emotion: int | None = None


class BaselineModel:
    """Attention seq2seq over a shared vocabulary.

    Emotion-conditioned variants subclass this and override the injection
    hooks (source rewrite, start token, extra recurrent channel, attention
    matrix, projection).
    """

    tag: str | None = None
    tokenizer_digest = TOKENIZER_DIGEST

    def __init__(self, vocab: Vocabulary, d: int, d_w: int, drop_p: float = 0.0,
                 padding: int = 30, seed: int = 0, dtype=np.float64):
        self.vocab = vocab
        self.d = d
        self.d_w = d_w
        self.drop_p = drop_p
        self.padding = padding
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        v = len(vocab)
        limit = 1.0 / np.sqrt(d)
        emb = rng.uniform(-0.1, 0.1, size=(v, d_w))
        # emotion tokens start with wide, well-separated embeddings; a one-token
        # signal initialized like ordinary words washes out of the encoder state
        from .vocab import EMOTION_TOKEN_OFFSET, NUM_EMOTION_SLOTS

        lo, hi = EMOTION_TOKEN_OFFSET, EMOTION_TOKEN_OFFSET + NUM_EMOTION_SLOTS
        emb[lo:hi] = rng.uniform(-1.0, 1.0, size=(NUM_EMOTION_SLOTS, d_w))
        self.embedding = Tensor(emb.astype(self.dtype), requires_grad=True)
        self.encoder = LstmCell(("x", "h"), (d_w, d), d, rng, self.dtype)
        extra = self.extra_recurrent_dims()
        dec_names = ("x", "h") + tuple(f"v{i}" if i else "v" for i in range(len(extra)))
        self.decoder = LstmCell(dec_names, (d_w, d) + extra, d, rng, self.dtype)
        self.att_w = T.uniform_param(rng, (d, d), limit, self.dtype)
        self.proj_w = T.uniform_param(rng, (d, v), limit, self.dtype)
        self.proj_b = T.zeros(v, dtype=self.dtype, requires_grad=True)
        self._init_emotion_params(rng)

    # ----- hooks overridden by emotion variants ------------------------------

    def extra_recurrent_dims(self) -> tuple:
        return ()

    def _init_emotion_params(self, rng):
        pass

    def source_ids(self, X: list[int], e: int | None) -> list[int]:
        return list(X)

    def start_token_ids(self, e_ids: np.ndarray | None, batch: int) -> np.ndarray:
        return np.full(batch, BOS, dtype=np.int64)

    def extra_recurrent_inputs(self, e_ids: np.ndarray | None):
        return []

    def attention_keys(self, enc: EncoderOutput, e_ids: np.ndarray | None) -> Tensor:
        return T.tanh(T.matmul(enc.states, self.att_w))

    def project(self, h_de: Tensor, e_ids: np.ndarray | None, training=False, rng=None) -> Tensor:
        d = T.dropout(h_de, self.drop_p, rng, training)
        return T.add(T.matmul(d, self.proj_w), self.proj_b)

    # ----- parameters ---------------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        out = {"embedding": self.embedding}
        out.update(self.encoder.named_parameters("encoder"))
        out.update(self.decoder.named_parameters("decoder"))
        out["attention.w"] = self.att_w
        out["proj.w"] = self.proj_w
        out["proj.b"] = self.proj_b
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    # ----- encoding -----------------------------------------------------------

    def encode_ids(self, ids: np.ndarray, mask: np.ndarray, training=False, rng=None) -> EncoderOutput:
        """Run the encoder over (B, m) token ids from the zero state.

        Masked (PAD) positions carry the previous state forward, so a padded
        batch encodes each row exactly as the unpadded sequence would.
        """
        ids = np.asarray(ids)
        if ids.ndim != 2 or ids.shape[1] < 1:
            raise ContractError(f"encoder input must be (B, m) with m >= 1, got {ids.shape}")
        b, m = ids.shape
        h = T.zeros((b, self.d), dtype=self.dtype)
        c = T.zeros((b, self.d), dtype=self.dtype)
        states = []
        for t in range(m):
            x = T.take_rows(self.embedding, ids[:, t])
            x = T.dropout(x, self.drop_p, rng, training)
            h2, c2 = self.encoder.step([x, h], c)
            col = mask[:, t]
            if np.all(col == 1.0):
                h, c = h2, c2
            else:
                mt = Tensor(np.asarray(col, dtype=self.dtype).reshape(b, 1))
                inv = Tensor(np.asarray(1.0 - col, dtype=self.dtype).reshape(b, 1))
                h = T.add(T.mul(h2, mt), T.mul(h, inv))
                c = T.add(T.mul(c2, mt), T.mul(c, inv))
            states.append(h)
        return EncoderOutput(T.stack_steps(states), h, c, np.asarray(mask, dtype=np.float64))

    def encode(self, X: list[int], e: int | None = None) -> EncoderOutput:
        """Encode one unpadded sequence (batch of one)."""
        X = self.source_ids(X, e)
        if len(X) == 0:
            raise ContractError("cannot encode an empty source")
        ids = np.asarray([X], dtype=np.int64)
        return self.encode_ids(ids, np.ones_like(ids, dtype=np.float64))

    # ----- attention ----------------------------------------------------------

    def attend(self, keys: Tensor, enc: EncoderOutput, h_de: Tensor):
        """Score keys against the decoder state -> (alpha (B,m), h_hat (B,D))."""
        b, m = keys.shape[0], keys.shape[1]
        if m == 0:
            raise ContractError("attention over zero encoder states")
        scores = T.reshape(T.matmul(keys, T.reshape(h_de, (b, self.d, 1))), (b, m))
        if not np.all(enc.mask == 1.0):
            mk = np.asarray(enc.mask, dtype=self.dtype)
            scores = T.add(T.mul(scores, Tensor(mk)), Tensor((1.0 - mk) * T.NEG_MASK))
        alpha = T.softmax(scores, axis=1)
        h_hat = T.reshape(T.matmul(T.reshape(alpha, (b, 1, m)), enc.states), (b, self.d))
        return alpha, h_hat

    # ----- decoding -----------------------------------------------------------

    def initial_state(self, enc: EncoderOutput) -> DecoderState:
        return DecoderState(enc.h_final, enc.c_final, step=0)

    def decode_step(self, y_prev: int, state: DecoderState, enc: EncoderOutput,
                    e: int | None = None):
        """One inference decode step for a single sequence.

        Consumes the previous token with state (h_hat, c), returns the new
        hidden state's logits and the state carrying the next attended vector.
        """
        if state.step >= self.padding:
            raise ContractError(f"decode step {state.step} exceeds padding length {self.padding}")
        e_ids = None if e is None else np.asarray([e], dtype=np.int64)
        ids = np.asarray([y_prev], dtype=np.int64)
        keys = self.attention_keys(enc, e_ids)
        h_de, c, alpha, h_hat, logits = self._step(ids, state.h_hat, state.c, keys, enc, e_ids)
        new_state = DecoderState(h_hat, c, state.step + 1)
        return (
            T.reshape(h_de, (self.d,)),
            T.reshape(logits, (len(self.vocab),)),
            new_state,
            T.reshape(alpha, (enc.m,)),
        )

    def _step(self, y_ids, h_hat, c, keys, enc, e_ids, training=False, rng=None):
        x = T.take_rows(self.embedding, y_ids)
        x = T.dropout(x, self.drop_p, rng, training)
        rec = [h_hat] + self.extra_recurrent_inputs(e_ids)
        h_de, c2 = self.decoder.step([x] + rec, c)
        alpha, h_hat2 = self.attend(keys, enc, h_de)
        logits = self.project(h_de, e_ids, training, rng)
        return h_de, c2, alpha, h_hat2, logits

    def greedy(self, X: list[int], e: int | None = None, max_len: int | None = None):
        """Greedy decode: feed the argmax token back in until EOS or max_len.

        Returns (token ids, attention rows), one attention row per emitted
        token.
        """
        max_len = self.padding if max_len is None else min(max_len, self.padding)
        enc = self.encode(X, e)
        e_ids = None if e is None else np.asarray([e], dtype=np.int64)
        keys = self.attention_keys(enc, e_ids)
        h_hat, c = enc.h_final, enc.c_final
        y = int(self.start_token_ids(e_ids, 1)[0])
        out_ids: list[int] = []
        rows: list[np.ndarray] = []
        for _ in range(max_len):
            _, c, alpha, h_hat, logits = self._step(
                np.asarray([y], dtype=np.int64), h_hat, c, keys, enc, e_ids
            )
            y = int(np.argmax(logits.data[0]))
            if y == EOS:
                break
            out_ids.append(y)
            rows.append(alpha.data[0].copy())
        return out_ids, rows

    def respond(self, text: str, e: int | None = None, max_len: int | None = None):
        """Text-in/text-out decoding; returns tokens and an AttentionTrace."""
        src_tokens = tokenize(text)
        if not src_tokens:
            raise ContractError("empty source text")
        src_tokens = src_tokens[: self.padding]
        X = self.vocab.encode(src_tokens)
        eff = self.source_ids(X, e)
        out_ids, rows = self.greedy(X, e, max_len)
        out_tokens = self.vocab.decode(out_ids)
        matrix = np.stack(rows) if rows else np.zeros((0, len(eff)))
        trace = AttentionTrace(self.vocab.decode(eff), out_tokens, matrix, emotion=e)
        return out_tokens, trace

    # ----- training loss ------------------------------------------------------

    def batch_loss(self, src_ids, src_mask, tgt_ids, tgt_mask, e_ids=None,
                   training=False, rng=None) -> Tensor:
        """Teacher-forced mean cross-entropy over non-PAD target steps.

        ``tgt_ids`` rows are target tokens with EOS appended then padded;
        the decoder consumes [start, y_1 .. y_{n-1}] and is scored against
        [y_1 .. y_n] at every unmasked step.
        """
        b, n = tgt_ids.shape
        enc = self.encode_ids(src_ids, src_mask, training, rng)
        keys = self.attention_keys(enc, e_ids)
        extra = self.extra_recurrent_inputs(e_ids)
        h_hat, c = enc.h_final, enc.c_final
        start = self.start_token_ids(e_ids, b)
        dec_in = np.concatenate([start[:, None], tgt_ids[:, :-1]], axis=1)
        total = None
        for t in range(n):
            x = T.take_rows(self.embedding, dec_in[:, t])
            x = T.dropout(x, self.drop_p, rng, training)
            h_de, c = self.decoder.step([x, h_hat] + extra, c)
            _, h_hat = self.attend(keys, enc, h_de)
            logits = self.project(h_de, e_ids, training, rng)
            ce = T.cross_entropy(logits, tgt_ids[:, t])
            ce = T.mul(ce, Tensor(np.asarray(tgt_mask[:, t], dtype=self.dtype)))
            total = ce if total is None else T.add(total, ce)
        n_tokens = float(np.asarray(tgt_mask).sum())
        if n_tokens <= 0:
            raise ContractError("no unmasked target tokens in batch")
        return T.mul(T.sum_(total), Tensor(np.asarray(1.0 / n_tokens, dtype=self.dtype)))


def attention(w: Tensor, h_de: Tensor, enc: EncoderOutput):
    """Global attention for one sequence: softmax(h_de . tanh(states @ w)).

    Returns (alpha (m,), h_hat (D,)); PAD positions are masked out before
    the softmax.
    """
    if enc.m == 0:
        raise ContractError("attention over zero encoder states")
    d = w.shape[0]
    keys = T.tanh(T.matmul(enc.states, w))
    b, m = keys.shape[0], keys.shape[1]
    scores = T.reshape(T.matmul(keys, T.reshape(h_de, (b, d, 1))), (b, m))
    if not np.all(enc.mask == 1.0):
        mk = np.asarray(enc.mask, dtype=scores.dtype)
        scores = T.add(T.mul(scores, Tensor(mk)), Tensor((1.0 - mk) * T.NEG_MASK))
    alpha = T.softmax(scores, axis=1)
    h_hat = T.reshape(T.matmul(T.reshape(alpha, (b, 1, m)), enc.states), (b, d))
    return T.reshape(alpha, (m,)), T.reshape(h_hat, (d,))


def sequence_loss(logits_steps, y_ids) -> Tensor:
    """Mean cross-entropy of a single decoded sequence against gold ids.

    ``logits_steps`` is a list of (V,) logit tensors, one per target step;
    ``y_ids`` the gold ids (ending with EOS).
    """
    if len(logits_steps) != len(y_ids):
        raise ContractError(f"{len(logits_steps)} logit rows vs {len(y_ids)} targets")
    if len(y_ids) == 0:
        raise ContractError("empty target")
    total = None
    for logits, y in zip(logits_steps, y_ids):
        row = T.reshape(logits, (1, logits.shape[-1]))
        ce = T.cross_entropy(row, np.asarray([y], dtype=np.int64))
        total = ce if total is None else T.add(total, ce)
    return T.mul(T.sum_(total), Tensor(np.asarray(1.0 / len(y_ids), dtype=total.dtype)))
