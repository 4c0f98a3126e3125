"""crashgraph: spatio-temporal graphs and GNN classifiers for crash severity."""

from .features import FileEmbeddingProvider, HashEmbeddingProvider, embed_hash
from .graphs import Graph, build_coarse, build_fine, load_graph, save_graph, split_masks
from .metrics import full_report
from .models import ModelConfig, register_arch
from .records import balance_undersample, binarize_severity, parse_records
from .synth import SynthParams, generate
from .training import TrainConfig, compare_models, grid_search, train

__version__ = "0.1.0"

__all__ = [
    "FileEmbeddingProvider",
    "Graph",
    "HashEmbeddingProvider",
    "ModelConfig",
    "SynthParams",
    "TrainConfig",
    "__version__",
    "balance_undersample",
    "binarize_severity",
    "build_coarse",
    "build_fine",
    "compare_models",
    "embed_hash",
    "full_report",
    "generate",
    "grid_search",
    "load_graph",
    "parse_records",
    "register_arch",
    "save_graph",
    "split_masks",
    "train",
]
