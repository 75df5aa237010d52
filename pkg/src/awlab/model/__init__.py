"""Encoder-decoder models over token streams, with attention and classification."""

from .vocab import PAD, START, END, UNK, Vocabulary, build_vocab, load_vocab, save_vocab
from .params import ModelParams, init_params, load_params, save_params
from .streams import source_streams, stream_for_field, vocab_for_field
from .network import (
    Vocabs,
    attend,
    classify_action_word,
    dump_attention,
    force_action_word,
    gru_step,
    predict_summary,
)
from .training import TrainConfig, train

__all__ = [
    "PAD",
    "START",
    "END",
    "UNK",
    "Vocabulary",
    "build_vocab",
    "load_vocab",
    "save_vocab",
    "ModelParams",
    "init_params",
    "load_params",
    "save_params",
    "Vocabs",
    "attend",
    "classify_action_word",
    "dump_attention",
    "force_action_word",
    "gru_step",
    "predict_summary",
    "source_streams",
    "stream_for_field",
    "vocab_for_field",
    "TrainConfig",
    "train",
]
