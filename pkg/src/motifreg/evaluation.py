"""Accuracy metrics, quartile breakdowns, sensitivity sweeps, runtime bench."""

from __future__ import annotations

import logging
import time

import numpy as np

from .graphs import Graph, LabelSet, Split, khop_neighborhood
from .gnn import predict_classes

log = logging.getLogger(__name__)


def accuracy(pred_classes, labels_arr, nodes) -> float:
    """Fraction of `nodes` whose predicted class matches the label."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        raise ValueError("accuracy over an empty node set")
    return float((np.asarray(pred_classes)[nodes] == np.asarray(labels_arr)[nodes]).mean())


def _quartile_rows(nodes, values, pred, y, label):
    """Rank-quartile accuracy rows: 4 near-equal bins, ties broken by node id."""
    nodes = np.asarray(nodes, dtype=np.int64)
    vals = np.asarray(values)
    order = np.lexsort((nodes, vals))
    rows = []
    for q, chunk_idx in enumerate(np.array_split(order, 4)):
        chunk = nodes[chunk_idx]
        rows.append(
            {
                "quartile": f"Q{q + 1}",
                label: f"{vals[chunk_idx].min():.6g}..{vals[chunk_idx].max():.6g}" if len(chunk) else "",
                "n": int(len(chunk)),
                "accuracy": accuracy(pred, y, chunk) if len(chunk) else None,
            }
        )
    return rows


def degree_report(g: Graph, probs, labels: LabelSet, test_nodes):
    """Accuracy across four degree ranges (rank quartiles of test degrees)."""
    y = labels.as_array(g.n_nodes)
    pred = predict_classes(np.asarray(probs))
    deg = g.degrees()[np.asarray(test_nodes, dtype=np.int64)]
    return _quartile_rows(test_nodes, deg, pred, y, "degree_range")


def label_fraction_report(g: Graph, split: Split, probs, labels: LabelSet):
    """Accuracy across quartiles of the labeled-train fraction in 2 hops.

    Q1 holds the test nodes with the smallest fraction of labeled training
    nodes inside their 2-hop neighborhood.
    """
    y = labels.as_array(g.n_nodes)
    pred = predict_classes(np.asarray(probs))
    train_set = set(map(int, split.train))
    fracs = []
    for v in split.test:
        hood = khop_neighborhood(g, {int(v)}, 2)
        fracs.append(len(hood & train_set) / len(hood))
    return _quartile_rows(split.test, np.array(fracs), pred, y, "label_fraction")


def attribute_diversity_report(g: Graph, x, split: Split, probs, labels: LabelSet):
    """Accuracy across quartiles of mean cosine distance to 2-hop neighbors.

    Zero vectors count as maximally similar (distance 0); occurrences are
    logged once per call.
    """
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    zero_rows = int((norms == 0).sum())
    if zero_rows:
        log.warning("attribute_diversity: %d zero attribute rows treated as distance 0", zero_rows)
    y = labels.as_array(g.n_nodes)
    pred = predict_classes(np.asarray(probs))
    divers = []
    for v in split.test:
        v = int(v)
        others = sorted(khop_neighborhood(g, {v}, 2) - {v})
        if not others or norms[v] == 0:
            divers.append(0.0)
            continue
        ns = norms[others]
        dots = x[others] @ x[v]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(ns > 0, dots / (ns * norms[v]), 1.0)
        divers.append(float(np.mean(1.0 - cos)))
    return _quartile_rows(split.test, np.array(divers), pred, y, "diversity_range")


def q_sweep(run_fn, q_values, seeds):
    """Accuracy vs sampled-instance budget; run_fn(Q, seed) -> test accuracy."""
    rows = []
    for q in q_values:
        accs = [run_fn(q, seed) for seed in seeds]
        rows.append(
            {
                "Q": int(q),
                "mean_acc": float(np.mean(accs)),
                "std_acc": float(np.std(accs)) if len(accs) >= 2 else None,
                "per_seed": [float(a) for a in accs],
            }
        )
    return rows


def linear_fit_r2(xs, ys):
    """Least-squares line fit quality of y against x."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    coeffs = np.polyfit(xs, ys, 1)
    resid = ys - np.polyval(coeffs, xs)
    ss_res = float((resid**2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    if ss_tot == 0:
        return 1.0
    return 1.0 - ss_res / ss_tot


def epoch_overhead_seconds(report):
    """Median per-epoch regularization overhead (attention + contrastive)."""
    per_epoch = [e["timing"]["attn_s"] + e["timing"]["mi_s"] for e in report["epochs"]]
    return float(np.median(per_epoch))


def runtime_bench(sizes, m, make_problem, train_fn, epochs=3):
    """Per-epoch timing of base vs regularized training across graph sizes.

    make_problem(n) -> (g, X, labels, split, catalog); train_fn(problem,
    regularize, epochs) -> report. Returns one row per size with the
    regularization overhead and base/regularized epoch medians.
    """
    rows = []
    for n in sizes:
        problem = make_problem(n)
        t0 = time.perf_counter()
        rep_base = train_fn(problem, False, epochs)
        base_total = time.perf_counter() - t0
        t0 = time.perf_counter()
        rep_reg = train_fn(problem, True, epochs)
        reg_total = time.perf_counter() - t0
        base_epoch = float(np.median([e["timing"]["sup_s"] for e in rep_base["epochs"]]))
        rows.append(
            {
                "n": int(n),
                "m": int(m),
                "base_epoch_s": base_epoch,
                "reg_overhead_s": epoch_overhead_seconds(rep_reg),
                "base_total_s": base_total,
                "reg_total_s": reg_total,
            }
        )
    return rows
