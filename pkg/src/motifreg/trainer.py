"""Multi-motif training curriculum: attention, novelty weighting, alternation.

Each epoch alternates two phases over shared parameters: (i) minibatch
optimization of the novelty-weighted supervised loss on labeled train nodes,
through motif attention and the class predictor; (ii) minibatch optimization
of the attention-weighted contrastive motif loss over all nodes, with the
attention weights recomputed between phases and held constant inside the
contrastive phase. Novelty weights over the labeled set are refreshed after
every epoch from the deviation of per-node attention from its mean. The
balance between the two objectives is implicit in the alternation; no
trade-off coefficient exists.
"""

from __future__ import annotations

import pickle
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .gnn import GnnConfig, build_encoder, classify, glorot, predict_classes, supervised_loss
from .graphs import Graph, LabelSet, Split
from .motifs import MotifInstanceIndex, MotifSpec, build_index
from .regularizer import MotifHead, assemble_mi_batch, motif_mi_loss, self_gate
from .rng import substream

LR_GRID = (1e-4, 1e-3, 1e-2)
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    Q: int = 20
    max_epochs: int = 100
    batch_size: int = 256
    lr: float | None = None        # None -> select from LR_GRID on validation accuracy
    patience: int = 10
    seed: int = 0
    regularize: bool = True
    gnn: GnnConfig = field(default_factory=GnnConfig)

    def __post_init__(self):
        if isinstance(self.gnn, dict):
            self.gnn = GnnConfig(**self.gnn)
        if self.Q < 1 or self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("Q, max_epochs, batch_size, patience must be positive")
        if self.lr is not None and self.lr <= 0:
            raise ValueError("lr must be positive")


def motif_attention(gated, p):
    """Per-node softmax attention over motif-gated embeddings.

    gated: list of (n, D) tensors, one per motif; p: (D, 1) attention vector.
    Returns (alpha (n, T), z (n, D)) with z the attention-weighted mixture.
    """
    cols = [ad.matmul(g_t, p) for g_t in gated]
    alpha = ad.row_softmax(ad.concat_rows(cols))
    z = None
    for t, g_t in enumerate(gated):
        term = ad.scale_rows(g_t, ad.take_column(alpha, t))
        z = term if z is None else ad.add(z, term)
    return alpha, z


def weighted_mi_loss(alpha, contributions, n_nodes, n_motifs):
    """Attention-weighted contrastive loss: sum alpha_vt * L_t(v) / (n T).

    `alpha` is a constant (n, T) array (not differentiated here);
    contributions hold (motif_id, node_ids, per-node loss tensor) for the
    (node, motif) pairs that actually have instances. Returns None when
    nothing contributes.
    """
    total = None
    for motif_id, node_ids, loss_vec in contributions:
        w = np.ascontiguousarray(alpha[node_ids, motif_id])
        s = ad.reduce_sum(ad.hadamard(loss_vec, ad.Tensor(w)))
        total = s if total is None else ad.add(total, s)
    if total is None:
        return None
    return ad.scale(total, 1.0 / (n_nodes * n_motifs))


def novelty_weights(alpha_labeled):
    """Softmax of squared deviation from the mean attention row.

    Input: (m, T) attention rows of the labeled nodes; output (m,) weights
    summing to one. Identical rows give the uniform 1/m.
    """
    alpha_labeled = np.asarray(alpha_labeled, dtype=np.float64)
    mu = alpha_labeled.mean(axis=0)
    dev = ((alpha_labeled - mu) ** 2).sum(axis=1)
    e = np.exp(dev - dev.max())
    return e / e.sum()


class Model:
    """Base encoder plus per-motif heads, motif attention, class predictor."""

    def __init__(self, g: Graph, in_dim, n_classes, catalog, config: TrainConfig, rng):
        self.config = config
        self.catalog = list(catalog) if config.regularize else []
        self.n_classes = n_classes
        self.in_dim = in_dim
        self.encoder = build_encoder(g, in_dim, config.gnn, rng)
        dim = config.gnn.out_dim
        if config.regularize:
            self.heads = [MotifHead.create(dim, rng) for _ in self.catalog]
            self.p = ad.parameter(glorot(rng, (dim, 1)))
        else:
            self.heads = []
            self.p = None
        self.w_cls = ad.parameter(glorot(rng, (dim, n_classes)))

    def params(self):
        out = dict(self.encoder.params())
        for t, head in enumerate(self.heads):
            out.update(head.params(f"motif{t}"))
        if self.p is not None:
            out["attn.p"] = self.p
        out["cls.W"] = self.w_cls
        return out

    def representation(self, x: ad.Tensor, train=False, rng=None):
        """(z, alpha, gated) — alpha/gated are None without regularization."""
        h = self.encoder.forward(x, train=train, rng=rng)
        if not self.config.regularize:
            return h, None, None
        gated = [self_gate(h, head) for head in self.heads]
        alpha, z = motif_attention(gated, self.p)
        return z, alpha, gated

    def snapshot(self):
        return {k: p.data.copy() for k, p in self.params().items()}

    def restore(self, snap):
        for k, p in self.params().items():
            p.data = snap[k].copy()


def predict(model: Model, g: Graph, x) -> np.ndarray:
    """Class probability rows for every node, evaluation mode."""
    if g.n_nodes != x.shape[0]:
        raise ValueError("feature rows do not match the graph")
    z, _, _ = model.representation(ad.Tensor(np.asarray(x)), train=False)
    return classify(z, model.w_cls).data


def _accuracy_on(probs, y, nodes):
    if len(nodes) == 0:
        return float("nan")
    pred = predict_classes(probs[nodes])
    return float((pred == y[nodes]).mean())


def _batches(order, size):
    for i in range(0, len(order), size):
        yield order[i : i + size]


def train(
    g: Graph,
    x,
    labels: LabelSet,
    split: Split,
    catalog,
    config: TrainConfig,
    index: MotifInstanceIndex | None = None,
):
    """Alternating-phase training; returns (model, report).

    Early-stops on validation accuracy with the configured patience and
    returns the best-validation snapshot. With `config.lr = None` the
    learning-rate grid is searched and the best arm (by validation accuracy)
    is returned, with per-arm summaries in the report.
    """
    if config.lr is None:
        arms = []
        for lr in LR_GRID:
            cfg = TrainConfig(**{**asdict(config), "lr": lr})
            arms.append((lr,) + train(g, x, labels, split, catalog, cfg, index=index))
        best_lr, best_model, best_report = max(arms, key=lambda a: a[2]["best_val_acc"])
        best_report["lr_grid"] = [
            {"lr": lr, "val_acc": rep["best_val_acc"], "test_acc": rep["test_acc"]}
            for lr, _, rep in arms
        ]
        best_report["selected_lr"] = best_lr
        return best_model, best_report

    t_start = time.perf_counter()
    n = g.n_nodes
    x = np.asarray(x)
    if x.shape[0] != n:
        raise ValueError("feature rows do not match the graph")
    y = labels.as_array(n)
    train_nodes = np.asarray(split.train, dtype=np.int64)
    if len(train_nodes) == 0:
        raise ValueError("empty training split")
    if len(split.val) == 0:
        raise ValueError("empty validation split (needed for early stopping)")

    init_rng = substream(config.seed, "init")
    dropout_rng = substream(config.seed, "dropout")
    batch_rng = substream(config.seed, "batching")
    sample_rng = substream(config.seed, "sampling")

    index_s = 0.0
    if config.regularize:
        if index is None:
            t0 = time.perf_counter()
            index = build_index(g, catalog)
            index_s = time.perf_counter() - t0
        n_motifs = len(catalog)
    else:
        n_motifs = 0

    model = Model(g, x.shape[1], labels.n_classes, catalog, config, init_rng)
    opt = _make_optimizer(model, config)
    x_t = ad.Tensor(x)

    beta = np.ones(len(train_nodes))  # unweighted first supervised phase
    beta_pos = {int(v): i for i, v in enumerate(train_nodes)}

    epochs = []
    best_val, best_epoch, best_snap = -1.0, -1, model.snapshot()
    fallback_total = 0

    for epoch in range(config.max_epochs):
        try:
            # ---- phase i: supervised loss over labeled train nodes, beta fixed
            t0 = time.perf_counter()
            sup_losses = []
            for batch in _batches(batch_rng.permutation(train_nodes), config.batch_size):
                z, _, _ = model.representation(x_t, train=True, rng=dropout_rng)
                probs = classify(ad.gather_rows(z, batch), model.w_cls)
                w = beta[[beta_pos[int(v)] for v in batch]]
                loss = supervised_loss(probs, y[batch], node_weights=w)
                ad.backward(loss)
                opt.step()
                sup_losses.append(loss.item())
            sup_s = time.perf_counter() - t0

            # ---- phase ii: recompute attention for all nodes (eval mode)
            t0 = time.perf_counter()
            alpha_all = None
            if config.regularize:
                _, alpha, _ = model.representation(x_t, train=False)
                alpha_all = alpha.data.astype(np.float64)
            attn_s = time.perf_counter() - t0

            # ---- phase iii: contrastive motif loss over all nodes, alpha fixed
            t0 = time.perf_counter()
            mi_losses = []
            if config.regularize:
                for batch in _batches(batch_rng.permutation(n), config.batch_size):
                    _, _, gated = model.representation(x_t, train=True, rng=dropout_rng)
                    contributions = []
                    for t in range(n_motifs):
                        mb = assemble_mi_batch(g, index, batch, t, config.Q, sample_rng)
                        if mb is None:
                            continue
                        fallback_total += mb.fallback_count
                        losses = motif_mi_loss(gated[t], mb, model.heads[t])
                        contributions.append((t, mb.anchor_nodes, losses))
                    loss = weighted_mi_loss(alpha_all, contributions, len(batch), n_motifs)
                    if loss is None:
                        continue
                    ad.backward(loss)
                    opt.step()
                    mi_losses.append(loss.item())
            mi_s = time.perf_counter() - t0

            # ---- phase iv: refresh novelty weights over the labeled train set
            if config.regularize:
                beta = novelty_weights(alpha_all[train_nodes])
        except ad.NumericError as exc:
            raise RuntimeError(f"training diverged at epoch {epoch}: {exc}") from exc

        t0 = time.perf_counter()
        probs = predict(model, g, x)
        val_acc = _accuracy_on(probs, y, split.val)
        test_acc = _accuracy_on(probs, y, split.test)
        eval_s = time.perf_counter() - t0

        epochs.append(
            {
                "epoch": epoch,
                "sup_loss": float(np.mean(sup_losses)) if sup_losses else None,
                "mi_loss": float(np.mean(mi_losses)) if mi_losses else None,
                "val_acc": val_acc,
                "test_acc": test_acc,
                "timing": {"sup_s": sup_s, "attn_s": attn_s, "mi_s": mi_s, "eval_s": eval_s},
            }
        )
        # ties prefer the later epoch: at equal validation evidence keep the
        # checkpoint that saw more training
        if val_acc >= best_val:
            best_val, best_epoch, best_snap = val_acc, epoch, model.snapshot()
        if epoch - best_epoch >= config.patience:
            break

    model.restore(best_snap)
    probs = predict(model, g, x)
    report = {
        "config": asdict(config),
        "seed": config.seed,
        "n_nodes": n,
        "n_motifs": n_motifs,
        "epochs": epochs,
        "best_epoch": best_epoch,
        "best_val_acc": best_val,
        "test_acc": _accuracy_on(probs, y, split.test),
        "fallback_negatives": fallback_total,
        "rng_states": {
            name: rng.bit_generator.state
            for name, rng in (
                ("init", init_rng),
                ("dropout", dropout_rng),
                ("batching", batch_rng),
                ("sampling", sample_rng),
            )
        },
        "timing": {"total_s": time.perf_counter() - t_start, "index_s": index_s},
    }
    return model, report


def _make_optimizer(model, config):
    from .optim import Adam

    return Adam(model.params(), lr=config.lr)


def strip_timing(report):
    """Copy of a report with every timing field removed (for comparisons)."""
    out = {k: v for k, v in report.items() if k != "timing"}
    out["epochs"] = [{k: v for k, v in e.items() if k != "timing"} for e in report["epochs"]]
    return out


def save_checkpoint(model: Model, path, extra=None):
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "in_dim": model.in_dim,
        "n_classes": model.n_classes,
        "catalog": [
            (s.name, s.directed, s.edges, s.slot_types, s.edge_types, s.code)
            for s in model.catalog
        ],
        "params": {k: p.data for k, p in model.params().items()},
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)


def load_checkpoint(path, g: Graph) -> Model:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload['version']}")
    config = TrainConfig(**payload["config"])
    catalog = [
        MotifSpec(name, d, edges, slot_types=st, edge_types=et, code=code)
        for name, d, edges, st, et, code in payload["catalog"]
    ]
    model = Model(g, payload["in_dim"], payload["n_classes"], catalog, config, substream(0, "load"))
    for k, p in model.params().items():
        p.data = payload["params"][k].copy()
    return model
