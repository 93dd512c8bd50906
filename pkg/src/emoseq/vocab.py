"""Tokenization, emotion inventory, vocabulary, and pretrained embeddings."""
from __future__ import annotations

import hashlib
import re
from collections import Counter

import numpy as np

from .errors import ContractError, FormatError
from .tensor import Tensor

# Canonical emotion order; non-emotion is always last and never an
# evaluation target.
EMOTIONS = [
    "anger",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "love",
    "thankfulness",
    "guilt",
]
NON_EMOTION = "non-emotion"
ALL_EMOTIONS = EMOTIONS + [NON_EMOTION]
NON_EMOTION_ID = len(EMOTIONS)
NUM_EMOTIONS = len(EMOTIONS)          # 9 evaluation targets
NUM_EMOTION_SLOTS = len(ALL_EMOTIONS)  # 10 trainable conditions

PAD, BOS, EOS, UNK = 0, 1, 2, 3
PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<s>", "</s>", "<unk>"
RESERVED_TOKENS = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN]
EMOTION_TOKEN_OFFSET = len(RESERVED_TOKENS)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

# Identity of the tokenization rules; stored in checkpoints so a dialogue
# model is only ever evaluated with a classifier that splits text the same way.
TOKENIZER_DIGEST = hashlib.sha256(b"lowercase-whitespace-punct-isolating-v1").hexdigest()[:16]


def emotion_token(name: str) -> str:
    return f"<{name}>"


def emotion_id(name: str) -> int:
    try:
        return ALL_EMOTIONS.index(name)
    except ValueError:
        raise ContractError(f"unknown emotion name {name!r}")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and isolate punctuation characters."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Token<->id bijection with fixed reserved and per-emotion token ids.

    Layout: ids 0..3 are PAD, BOS, EOS, UNK; ids 4..13 the ten emotion
    tokens (non-emotion included); corpus tokens follow by frequency.
    """

    def __init__(self, corpus_tokens: list[str]):
        self.tokens = RESERVED_TOKENS + [emotion_token(e) for e in ALL_EMOTIONS] + list(corpus_tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ContractError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK)

    def emotion_token_id(self, e: int) -> int:
        if not 0 <= e < NUM_EMOTION_SLOTS:
            raise ContractError(f"emotion id {e} out of range")
        return EMOTION_TOKEN_OFFSET + e

    def is_emotion_token_id(self, i: int) -> bool:
        return EMOTION_TOKEN_OFFSET <= i < EMOTION_TOKEN_OFFSET + NUM_EMOTION_SLOTS

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.index.get(t, UNK) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def reserved_count() -> int:
    return len(RESERVED_TOKENS) + NUM_EMOTION_SLOTS


def build_vocab(pairs, cap: int) -> Vocabulary:
    """Build a shared source/target vocabulary from token pairs.

    Most frequent tokens are admitted up to ``cap`` total entries
    (reserved and emotion tokens included); frequency ties break
    lexicographically.
    """
    floor = reserved_count()
    if cap < floor:
        raise ContractError(f"cap {cap} below the {floor} reserved+emotion tokens")
    counts = Counter()
    n = 0
    for pair in pairs:
        n += 1
        counts.update(pair.source_tokens)
        counts.update(pair.target_tokens)
    if n == 0:
        raise ContractError("empty corpus")
    special = set(RESERVED_TOKENS) | {emotion_token(e) for e in ALL_EMOTIONS}
    ranked = sorted(
        (t for t in counts if t not in special),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(ranked[: cap - floor])


def load_embeddings(path, vocab: Vocabulary, seed: int = 0, dim: int | None = None):
    """Load word vectors in the text format "word v1 ... vd", one per line.

    An optional leading "count dim" header is tolerated. Vocabulary words
    found in the file get the file's vector; all other rows are seeded
    uniform(-0.1, 0.1). The returned table is trainable.
    """
    vectors: dict[str, np.ndarray] = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header
                except ValueError:
                    pass
            word, vals = parts[0], parts[1:]
            if not vals:
                raise FormatError("no vector values", line_no)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise FormatError(f"expected {width} values, got {len(vals)}", line_no)
            try:
                vectors[word] = np.array([float(v) for v in vals])
            except ValueError:
                raise FormatError("non-numeric vector value", line_no)
    if width is None:
        if dim is None:
            raise FormatError("embedding file is empty and no fallback dim given")
        width = dim
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), width))
    found = 0
    for i, tok in enumerate(vocab.tokens):
        if tok in vectors:
            table[i] = vectors[tok]
            found += 1
    return Tensor(table, requires_grad=True), found
