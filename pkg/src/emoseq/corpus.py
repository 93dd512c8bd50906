"""Dialogue corpus ingestion, splitting, and a synthetic marked corpus.

The corpus file format is TSV: source TAB target, with an optional third
column holding an emotion name. The synthetic generator produces pairs
whose target embeds exactly one marker word from the chosen emotion's
three-word lexicon, together with a lexical oracle classifier that is
exact on generated data.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .vocab import (
    ALL_EMOTIONS,
    EMOTIONS,
    NUM_EMOTIONS,
    TOKENIZER_DIGEST,
    Vocabulary,
    emotion_id,
    tokenize,
)

PADDING_LENGTH = 30


@dataclass
class TextPair:
    """A tokenized (source, target) exchange, before vocabulary encoding."""

    source_tokens: list[str]
    target_tokens: list[str]
    emotion: int | None = None  # index into ALL_EMOTIONS
    line_no: int | None = None


@dataclass
class DialoguePair:
    """A vocabulary-encoded exchange ready for training."""

    source: list[int]
    target: list[int]
    emotion: int | None = None
    line_no: int | None = None


@dataclass
class IngestStats:
    read: int = 0
    kept: int = 0
    malformed: int = 0
    duplicates: int = 0
    too_short: int = 0
    truncated: int = 0


def ingest_pairs(path, min_words: int = 6, max_len: int = PADDING_LENGTH):
    """Read pairs from a TSV file, dropping duplicates and short utterances.

    Either side with fewer than ``min_words`` whitespace words drops the
    pair; token sequences longer than ``max_len`` are truncated. Malformed
    lines are skipped and counted. Unknown emotion names are an error.
    """
    pairs: list[TextPair] = []
    stats = IngestStats()
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            stats.read += 1
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                stats.malformed += 1
                warnings.warn(f"skipping malformed line {line_no} ({len(fields)} fields)")
                continue
            src, tgt = fields[0], fields[1]
            emo = None
            if len(fields) == 3 and fields[2]:
                emo = emotion_id(fields[2])  # raises on unknown names
            if (src, tgt) in seen:
                stats.duplicates += 1
                continue
            seen.add((src, tgt))
            if len(src.split()) < min_words or len(tgt.split()) < min_words:
                stats.too_short += 1
                continue
            s_toks, t_toks = tokenize(src), tokenize(tgt)
            if len(s_toks) > max_len or len(t_toks) > max_len:
                stats.truncated += 1
            pairs.append(
                TextPair(s_toks[:max_len], t_toks[:max_len], emotion=emo, line_no=line_no)
            )
            stats.kept += 1
    return pairs, stats


def encode_pairs(pairs: list[TextPair], vocab: Vocabulary) -> list[DialoguePair]:
    out = []
    for p in pairs:
        out.append(
            DialoguePair(
                vocab.encode(p.source_tokens),
                vocab.encode(p.target_tokens),
                emotion=p.emotion,
                line_no=p.line_no,
            )
        )
    return out


def split(pairs, ratio: float, seed: int = 0):
    """Seeded shuffle then split into (train, dev); disjoint and exhaustive."""
    if not 0.0 < ratio < 1.0:
        raise ContractError(f"split ratio {ratio} outside (0, 1)")
    if len(pairs) < 2:
        raise ContractError("need at least 2 pairs to split")
    order = np.random.default_rng(seed).permutation(len(pairs))
    cut = int(len(pairs) * ratio)
    cut = min(max(cut, 1), len(pairs) - 1)
    train = [pairs[i] for i in order[:cut]]
    dev = [pairs[i] for i in order[cut:]]
    return train, dev


# ---------------------------------------------------------------------------
# synthetic emotion-marked corpus

MARKERS: dict[str, list[str]] = {
    "anger": ["furious", "livid", "outraged"],
    "disgust": ["disgusted", "nauseated", "repulsed"],
    "fear": ["terrified", "frightened", "fearful"],
    "joy": ["delighted", "thrilled", "overjoyed"],
    "sadness": ["heartbroken", "miserable", "sorrowful"],
    "surprise": ["astonished", "stunned", "startled"],
    "love": ["smitten", "adoring", "enamored"],
    "thankfulness": ["grateful", "thankful", "appreciative"],
    "guilt": ["guilty", "ashamed", "remorseful"],
}

_TOPICS = ["weather", "dinner", "movie", "garden", "meeting", "concert", "trip", "morning", "game", "party"]
_PLACES = ["hotel", "station", "office", "market", "kitchen", "school"]

_SOURCE_TEMPLATES = [
    "tell me about the {topic}",
    "what do you think of the {topic}",
    "how was the {topic} at the {place}",
    "did you see the {topic} at the {place}",
    "talk to me about the {topic}",
    "what happened during the {topic}",
]

# Markers sit near the front of every template (position 1 or 2): early
# enough that a one-token injection survives to the marker step, but never
# first, since per-emotion attention cannot influence the first decode step.
_TARGET_TEMPLATES = [
    "truly {marker} about the whole {topic}",
    "i feel {marker} about the {topic}",
    "feeling {marker} after the whole {topic}",
]


class LexicalOracle:
    """Marker-lookup classifier: exact on the synthetic corpus by construction.

    Scores each of the 9 emotions by marker occurrences; with no marker
    present the distribution is uniform. Implements the same classify
    surface as the trained classifier so evaluation can use either.
    """

    tokenizer_digest = TOKENIZER_DIGEST

    def __init__(self, markers: dict[str, list[str]] | None = None):
        markers = markers or MARKERS
        self.marker_to_emotion = {
            m: EMOTIONS.index(e) for e, ms in markers.items() for m in ms
        }

    def classify(self, text: str):
        from .classifier import EmotionDistribution

        counts = np.zeros(NUM_EMOTIONS)
        for tok in tokenize(text):
            e = self.marker_to_emotion.get(tok)
            if e is not None:
                counts[e] += 1.0
        if counts.sum() == 0:
            probs = np.full(NUM_EMOTIONS, 1.0 / NUM_EMOTIONS)
        else:
            probs = counts / counts.sum()
        return EmotionDistribution(probs)


def synth_corpus(n_pairs: int, seed: int):
    """Generate labeled pairs from a closed template grammar.

    Every target contains exactly one marker token from the labeled
    emotion's three-marker lexicon; markers never appear anywhere else.
    Returns (pairs, oracle) where the oracle classifies generated targets
    with perfect accuracy.
    """
    if n_pairs < 1:
        raise ContractError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    pairs: list[TextPair] = []
    for i in range(n_pairs):
        topic = _TOPICS[rng.integers(len(_TOPICS))]
        place = _PLACES[rng.integers(len(_PLACES))]
        src_t = _SOURCE_TEMPLATES[rng.integers(len(_SOURCE_TEMPLATES))]
        tgt_t = _TARGET_TEMPLATES[rng.integers(len(_TARGET_TEMPLATES))]
        e = int(rng.integers(NUM_EMOTIONS))
        marker = MARKERS[EMOTIONS[e]][rng.integers(3)]
        src = src_t.format(topic=topic, place=place)
        tgt = tgt_t.format(topic=topic, marker=marker)
        pairs.append(TextPair(tokenize(src), tokenize(tgt), emotion=e, line_no=i + 1))
    return pairs, LexicalOracle()


def write_pairs_tsv(pairs: list[TextPair], path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            emo = "" if p.emotion is None else "\t" + ALL_EMOTIONS[p.emotion]
            fh.write(" ".join(p.source_tokens) + "\t" + " ".join(p.target_tokens) + emo + "\n")
