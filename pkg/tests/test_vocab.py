import numpy as np
import pytest

from emoseq.corpus import TextPair
from emoseq.errors import ContractError, FormatError
from emoseq.vocab import (
    BOS,
    EMOTION_TOKEN_OFFSET,
    EMOTIONS,
    NON_EMOTION,
    NUM_EMOTION_SLOTS,
    PAD,
    UNK,
    Vocabulary,
    build_vocab,
    emotion_id,
    load_embeddings,
    reserved_count,
    tokenize,
)


class TestTokenize:
    def test_example_utterance(self):
        assert tokenize("You scared me today at the hotel") == [
            "you", "scared", "me", "today", "at", "the", "hotel",
        ]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_isolated(self):
        assert tokenize("don't stop.") == ["don", "'", "t", "stop", "."]

    def test_lowercases(self):
        assert tokenize("HeLLo WORLD") == ["hello", "world"]


class TestEmotionInventory:
    def test_nine_emotions_in_order(self):
        assert EMOTIONS == [
            "anger", "disgust", "fear", "joy", "sadness",
            "surprise", "love", "thankfulness", "guilt",
        ]

    def test_non_emotion_is_last(self):
        assert emotion_id(NON_EMOTION) == 9

    def test_unknown_emotion_rejected(self):
        with pytest.raises(ContractError):
            emotion_id("boredom")


def _pairs(*texts):
    return [TextPair(tokenize(t), [], emotion=None) for t in texts]


class TestBuildVocab:
    def test_frequency_order(self):
        v = build_vocab(_pairs("a a b"), cap=20)
        assert v.id_of("a") < v.id_of("b")

    def test_tie_broken_lexicographically(self):
        v = build_vocab(_pairs("zeta alpha"), cap=20)
        assert v.id_of("alpha") < v.id_of("zeta")

    def test_cap_boundary_admits_zero_corpus_tokens(self):
        v = build_vocab(_pairs("a b c"), cap=reserved_count())
        assert len(v) == reserved_count()
        assert v.id_of("a") == UNK

    def test_cap_below_reserved_rejected(self):
        with pytest.raises(ContractError):
            build_vocab(_pairs("a"), cap=reserved_count() - 1)

    def test_beyond_cap_maps_to_unk(self):
        v = build_vocab(_pairs("a a a b b c"), cap=reserved_count() + 2)
        assert v.id_of("a") != UNK
        assert v.id_of("b") != UNK
        assert v.id_of("c") == UNK

    def test_empty_corpus_rejected(self):
        with pytest.raises(ContractError):
            build_vocab([], cap=100)

    def test_deterministic(self):
        mk = lambda: build_vocab(_pairs("the quick brown fox", "the lazy dog"), cap=50)
        assert mk().tokens == mk().tokens

    def test_reserved_layout(self):
        v = build_vocab(_pairs("hello"), cap=50)
        assert v.tokens[PAD] == "<pad>"
        assert v.tokens[BOS] == "<s>"
        assert v.tokens[2] == "</s>"
        assert v.tokens[3] == "<unk>"
        for i in range(NUM_EMOTION_SLOTS):
            assert v.emotion_token_id(i) == EMOTION_TOKEN_OFFSET + i
        assert v.tokens[v.emotion_token_id(0)] == "<anger>"
        assert v.tokens[v.emotion_token_id(9)] == "<non-emotion>"

    def test_encode_decode_round_trip(self):
        v = build_vocab(_pairs("alpha beta gamma"), cap=50)
        ids = v.encode(["alpha", "beta", "gamma"])
        assert v.decode(ids) == ["alpha", "beta", "gamma"]
        assert v.encode(v.decode(list(range(len(v))))) == list(range(len(v)))


class TestLoadEmbeddings:
    def test_direct_copy(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("hello 0.1 0.2\n")
        v = build_vocab(_pairs("hello world"), cap=50)
        table, found = load_embeddings(path, v)
        assert found == 1
        assert np.allclose(table.data[v.id_of("hello")], [0.1, 0.2])
        assert table.requires_grad

    def test_missing_word_in_init_range(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("hello 0.5 0.5\n")
        v = build_vocab(_pairs("hello world"), cap=50)
        table, _ = load_embeddings(path, v, seed=3)
        row = table.data[v.id_of("world")]
        assert (np.abs(row) < 0.1).all()

    def test_header_line_skipped(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("2 300\nhello " + " ".join(["0.0"] * 300) + "\n")
        v = build_vocab(_pairs("hello"), cap=50)
        table, found = load_embeddings(path, v)
        assert found == 1
        assert table.shape == (len(v), 300)

    def test_inconsistent_width_names_line(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("hello 0.1 0.2\nworld 0.3\n")
        v = build_vocab(_pairs("hello world"), cap=50)
        with pytest.raises(FormatError, match="line 2"):
            load_embeddings(path, v)
