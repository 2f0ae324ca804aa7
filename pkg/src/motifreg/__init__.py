"""Motif-regularized graph neural networks.

Enumerates 3-node network motifs (untyped and typed), trains message-passing
encoders for semi-supervised node classification, and regularizes them with
per-motif contrastive objectives under a multi-motif training curriculum.
"""

from .graphs import (
    Graph,
    LabelSet,
    Split,
    khop_neighborhood,
    largest_connected_component,
    load_features,
    load_graph,
    load_labels,
    make_splits,
    save_graph,
)
from .motifs import (
    MotifInstanceIndex,
    MotifSpec,
    Schema,
    build_index,
    builtin_catalog,
    canonical_code,
    sample_instances,
    sample_negative_instance,
    typed_catalog,
)
from .gnn import GnnConfig, classify, normalize_adjacency, supervised_loss
from .trainer import (
    Model,
    TrainConfig,
    load_checkpoint,
    motif_attention,
    novelty_weights,
    predict,
    save_checkpoint,
    train,
    weighted_mi_loss,
)
from .synthetic import generate_ba_graph, planted_role_benchmark, planted_role_split

__version__ = "0.1.0"

__all__ = [
    "Graph", "LabelSet", "Split", "khop_neighborhood", "largest_connected_component",
    "load_features", "load_graph", "load_labels", "make_splits", "save_graph",
    "MotifInstanceIndex", "MotifSpec", "Schema", "build_index", "builtin_catalog",
    "canonical_code", "sample_instances", "sample_negative_instance", "typed_catalog",
    "GnnConfig", "classify", "normalize_adjacency", "supervised_loss",
    "Model", "TrainConfig", "load_checkpoint", "motif_attention", "novelty_weights",
    "predict", "save_checkpoint", "train", "weighted_mi_loss",
    "generate_ba_graph", "planted_role_benchmark", "planted_role_split",
    "__version__",
]
