"""Synthetic-graph runtime benchmark problems (shared by CLI and tests)."""

from __future__ import annotations

import numpy as np

from .gnn import GnnConfig
from .graphs import LabelSet, make_splits
from .motifs import build_index, builtin_catalog
from .synthetic import generate_ba_graph
from .trainer import TrainConfig, train


def ba_problem(n, m, seed=0, feature_dim=16):
    """Preferential-attachment graph with random features and binary labels."""
    g = generate_ba_graph(n, m, seed=seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.standard_normal((n, feature_dim)).astype(np.float64)
    labels = LabelSet({v: int(rng.integers(2)) for v in range(n)}, 2)
    split = make_splits(labels, 0.4, 0.1, seed=seed)
    catalog = builtin_catalog(directed=False)
    index = build_index(g, catalog)
    return g, x, labels, split, catalog, index


def train_for_bench(epochs=3, seed=0, hidden=16, Q=10):
    """train_fn for runtime_bench: fixed small model, no early stopping."""

    def fn(problem, regularize, n_epochs):
        g, x, labels, split, catalog, index = problem
        cfg = TrainConfig(
            Q=Q,
            max_epochs=n_epochs if n_epochs else epochs,
            # one batch per phase: each extra batch repeats the full-graph
            # forward, which would fold base-GNN cost into the overhead
            batch_size=g.n_nodes,
            lr=1e-2,
            patience=max(n_epochs or epochs, epochs),
            seed=seed,
            regularize=regularize,
            gnn=GnnConfig(arch="gcn", layers=2, hidden=hidden, dropout=0.3, out_dim=hidden),
        )
        _, report = train(g, x, labels, split, catalog, cfg, index=index)
        return report

    return fn
