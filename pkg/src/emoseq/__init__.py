"""Emotion-conditioned open-domain response generation, desk scale.

An LSTM encoder-decoder with global attention, seven ways of injecting a
target emotion, a bi-LSTM emotion classifier for corpus labeling and
response evaluation, and a CLI/HTTP pipeline around them. All numeric
work runs on a small tape-based autodiff core.
"""

__version__ = "0.1.0"

from .classifier import EmotionDistribution, TextClassifier, apply_threshold
from .corpus import DialoguePair, LexicalOracle, ingest_pairs, split, synth_corpus
from .model import AttentionTrace, BaselineModel, DecoderState, EncoderOutput
from .tensor import Tape, Tensor, backward
from .training import ModelConfig, desk_profile, paper_profile, train_dialogue
from .variants import VariantModel, count_extra_params
from .vocab import EMOTIONS, NON_EMOTION, Vocabulary, build_vocab, tokenize
