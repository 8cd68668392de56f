"""Graph-to-text laboratory.

A small trainable encoder-decoder with structure-aware adapters, the full
graph-representation pipeline (PENMAN parsing, linearization, token-graph
construction), and a reproducible experiment harness over a synthetic corpus.
"""

__version__ = "0.1.0"

from .adapters import AdapterConfig
from .bpe import Vocabulary, train_vocab
from .data import DatasetRecord, load_jsonl, save_jsonl
from .graphrep import Linearization, TokenGraph, UnlabeledGraph, build_token_graph, linearize, to_unlabeled
from .metrics import bleu, chrf
from .model import ModelBundle
from .penman import AmrGraph, graph_stats, normalize_inverse_roles, parse_penman, serialize_penman
from .synth import generate_corpus
from .training import TrainConfig, beam_search, train
from .transformer import BackboneConfig

__all__ = [
    "AdapterConfig", "AmrGraph", "BackboneConfig", "DatasetRecord",
    "Linearization", "ModelBundle", "TokenGraph", "TrainConfig",
    "UnlabeledGraph", "Vocabulary", "beam_search", "bleu", "build_token_graph",
    "chrf", "generate_corpus", "graph_stats", "linearize", "load_jsonl",
    "normalize_inverse_roles", "parse_penman", "save_jsonl",
    "serialize_penman", "to_unlabeled", "train", "train_vocab",
]
