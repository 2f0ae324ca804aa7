"""Base message-passing encoders (GCN, GAT) and the supervised head.

Aggregation always runs over the symmetrized neighbor set; directed inputs
keep their direction only for motif matching. GCN uses the renormalization
trick (self-connections added inside the degree normalization), GAT adds
explicit self-loop edges. Hidden nonlinearity: tanh for GCN, elu for GAT;
the final layer is linear.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .graphs import Graph

log = logging.getLogger(__name__)


@dataclass
class GnnConfig:
    arch: str = "gcn"
    layers: int = 2
    hidden: int = 256
    heads: int = 8
    dropout: float = 0.5
    out_dim: int | None = None

    def __post_init__(self):
        if self.arch not in ("gcn", "gat"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.layers < 1 or self.hidden < 1 or self.heads < 1:
            raise ValueError("layers, hidden, heads must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout {self.dropout} outside [0, 1)")
        if self.out_dim is None:
            self.out_dim = self.hidden


def normalize_adjacency(g: Graph) -> sp.csr_matrix:
    """Symmetric degree-normalized operator with self-connections.

    D^{-1/2} (A + I) D^{-1/2} over the symmetrized adjacency; D counts the
    self-connection.
    """
    n = g.n_nodes
    rows, cols = [], []
    for u in range(n):
        for v in g.neighbors[u]:
            rows.append(u)
            cols.append(int(v))
        rows.append(u)
        cols.append(u)
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    deg = np.asarray(a.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    return sp.diags(dinv) @ a @ sp.diags(dinv)


def glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def self_loop_edges(g: Graph):
    """(src, dst) arrays of the symmetrized edge set plus self-loops."""
    src, dst = [], []
    for u in range(g.n_nodes):
        for v in g.neighbors[u]:
            src.append(int(v))
            dst.append(u)
        src.append(u)
        dst.append(u)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


class GcnEncoder:
    """Stack of degree-normalized convolution layers, tanh between layers."""

    def __init__(self, g: Graph, in_dim, config: GnnConfig, rng):
        self.config = config
        self.adj = normalize_adjacency(g)
        dims = [in_dim] + [config.hidden] * (config.layers - 1) + [config.out_dim]
        self.weights = [ad.parameter(glorot(rng, (dims[i], dims[i + 1]))) for i in range(config.layers)]
        self.biases = [ad.parameter(np.zeros(dims[i + 1])) for i in range(config.layers)]

    def params(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"gcn.layer{i}.W"] = w
            out[f"gcn.layer{i}.b"] = b
        return out

    def forward(self, x: ad.Tensor, train=False, rng=None):
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.dropout(h, self.config.dropout, train, rng)
            h = ad.add(ad.sparse_adj_matmul(self.adj, ad.matmul(h, w)), b)
            if i < len(self.weights) - 1:
                h = ad.tanh(h)
        return h


class GatEncoder:
    """Multi-head attention aggregation; heads concatenate on hidden layers
    and average on the output layer."""

    def __init__(self, g: Graph, in_dim, config: GnnConfig, rng):
        self.config = config
        self.src, self.dst = self_loop_edges(g)
        self.n = g.n_nodes
        self.layers = []
        d_in = in_dim
        for layer in range(config.layers):
            last = layer == config.layers - 1
            d_out = config.out_dim if last else config.hidden
            heads = []
            for _ in range(config.heads):
                heads.append(
                    {
                        "W": ad.parameter(glorot(rng, (d_in, d_out))),
                        "a_src": ad.parameter(glorot(rng, (d_out, 1))),
                        "a_dst": ad.parameter(glorot(rng, (d_out, 1))),
                    }
                )
            self.layers.append(heads)
            d_in = d_out if last else d_out * config.heads
        self.out_dim = config.out_dim

    def params(self):
        out = {}
        for li, heads in enumerate(self.layers):
            for hi, head in enumerate(heads):
                for k, v in head.items():
                    out[f"gat.layer{li}.head{hi}.{k}"] = v
        return out

    def _head_forward(self, h, head):
        wh = ad.matmul(h, head["W"])
        e_src = ad.reshape(ad.matmul(wh, head["a_src"]), (-1,))
        e_dst = ad.reshape(ad.matmul(wh, head["a_dst"]), (-1,))
        logits = ad.leaky_relu(
            ad.add(ad.gather_rows(e_src, self.src), ad.gather_rows(e_dst, self.dst)), 0.2
        )
        alpha = ad.segment_softmax(logits, self.dst, self.n)
        msgs = ad.scale_rows(ad.gather_rows(wh, self.src), alpha)
        return ad.segment_sum(msgs, self.dst, self.n)

    def forward(self, x: ad.Tensor, train=False, rng=None):
        h = x
        for li, heads in enumerate(self.layers):
            h = ad.dropout(h, self.config.dropout, train, rng)
            outs = [self._head_forward(h, head) for head in heads]
            last = li == len(self.layers) - 1
            if last:
                acc = outs[0]
                for o in outs[1:]:
                    acc = ad.add(acc, o)
                h = ad.scale(acc, 1.0 / len(outs))
            else:
                h = ad.elu(ad.concat_rows(outs))
        return h


def build_encoder(g: Graph, in_dim, config: GnnConfig, rng):
    if config.arch == "gcn":
        return GcnEncoder(g, in_dim, config, rng)
    return GatEncoder(g, in_dim, config, rng)


def classify(z: ad.Tensor, w_cls: ad.Tensor) -> ad.Tensor:
    """Row-softmax class probabilities of a linear map of the embeddings."""
    return ad.row_softmax(ad.matmul(z, w_cls))


def predict_classes(probs: np.ndarray) -> np.ndarray:
    """Argmax with lowest-class-index tie-break."""
    return probs.argmax(axis=1)


_CLAMP = 1e-12


def supervised_loss(probs: ad.Tensor, label_idx, node_weights=None) -> ad.Tensor:
    """Weighted cross entropy: -sum_v beta_v log p_v[y_v].

    `probs` rows correspond to the nodes carrying `label_idx`; unit weights
    recover the plain supervised loss. Probabilities are clamped at 1e-12
    (clamping is logged, it signals a saturated softmax).
    """
    label_idx = np.asarray(label_idx, dtype=np.int64)
    picked = ad.take_per_row(probs, label_idx)
    if (picked.data < _CLAMP).any():
        log.warning(
            "supervised_loss: clamped %d probabilities at %.0e",
            int((picked.data < _CLAMP).sum()), _CLAMP,
        )
    picked = ad.clip(picked, _CLAMP, 1.0)
    logp = ad.log(picked)
    if node_weights is not None:
        logp = ad.hadamard(logp, ad.as_tensor(np.asarray(node_weights, dtype=logp.data.dtype)))
    return ad.scale(ad.reduce_sum(logp), -1.0)


def gradcheck_layer_cases(n_configs=8, seed=0):
    """Scalar-loss builders differentiating tiny GCN/GAT layers through X."""
    from .graphs import Graph

    cases = []
    for c in range(n_configs):
        rng = np.random.default_rng(seed * 77 + c)
        n = int(rng.integers(4, 8))
        edges = []
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < 0.5:
                    edges.append((u, v))
        if not edges:
            edges = [(0, 1)]
        g = Graph.from_edges(n, np.array(edges, dtype=np.int32), False)
        f_in = int(rng.integers(2, 5))
        x0 = rng.standard_normal((n, f_in))
        for arch in ("gcn", "gat"):
            cfg = GnnConfig(arch=arch, layers=2, hidden=3, heads=2, dropout=0.0, out_dim=2)
            enc = build_encoder(g, f_in, cfg, np.random.default_rng(int(rng.integers(1 << 30))))

            def builder(x, enc=enc):
                return ad.reduce_sum(ad.tanh(enc.forward(x, train=False)))

            cases.append((f"{arch}_layer", builder, x0))
    return cases
