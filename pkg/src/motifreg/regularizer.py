"""Per-motif contrastive regularization heads.

Each catalog motif owns a head: a self-gating unit adapting the base
embedding, an attention-based instance encoder, an averaging readout into a
motif-level summary, and a bilinear discriminator scoring (instance, summary)
pairs. The noise-contrastive loss pushes observed instances above attribute
perturbed fakes, feeding gradients back into the base encoder through the
multiplicative gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .gnn import glorot
from .motifs import MotifInstanceIndex, sample_instances, sample_negative_instance

PROB_CLAMP = 1e-12


@dataclass
class MotifHead:
    gate_w: ad.Tensor      # (D, D)
    gate_b: ad.Tensor      # (D,)
    enc_a: ad.Tensor       # (2D, 1)
    disc_w: ad.Tensor      # (D, D)

    @staticmethod
    def create(dim, rng):
        return MotifHead(
            gate_w=ad.parameter(glorot(rng, (dim, dim))),
            gate_b=ad.parameter(np.zeros(dim)),
            enc_a=ad.parameter(glorot(rng, (2 * dim, 1))),
            disc_w=ad.parameter(glorot(rng, (dim, dim))),
        )

    def params(self, prefix):
        return {
            f"{prefix}.gate_w": self.gate_w,
            f"{prefix}.gate_b": self.gate_b,
            f"{prefix}.enc_a": self.enc_a,
            f"{prefix}.disc_w": self.disc_w,
        }


def self_gate(h: ad.Tensor, head: MotifHead) -> ad.Tensor:
    """h ⊙ sigmoid(h W_g + b_g): feature-wise gate, multiplicative skip."""
    return ad.hadamard(h, ad.sigmoid(ad.add(ad.matmul(h, head.gate_w), head.gate_b)))


def encode_instances(gated: ad.Tensor, triples: np.ndarray, head: MotifHead) -> ad.Tensor:
    """Instance-specific representations for anchor-first triples.

    Attention over all three member nodes (anchor included) with weights
    softmax(a · [h_u ‖ h_anchor]); output is the weighted sum of gated
    member embeddings. Returns ((B, D) encodings, (3B,) attention weights)
    for triples (B, 3).
    """
    triples = np.asarray(triples, dtype=np.int64)
    if triples.ndim != 2 or triples.shape[1] != 3:
        raise ValueError(f"triples must be (B, 3), got {triples.shape}")
    B = triples.shape[0]
    members = triples.reshape(-1)
    anchors = np.repeat(triples[:, 0], 3)
    seg = np.repeat(np.arange(B), 3)

    h_m = ad.gather_rows(gated, members)
    h_a = ad.gather_rows(gated, anchors)
    logits = ad.reshape(ad.matmul(ad.concat_rows([h_m, h_a]), head.enc_a), (-1,))
    weights = ad.segment_softmax(logits, seg, B)
    return ad.segment_sum(ad.scale_rows(h_m, weights), seg, B), weights


def readout(encoded: ad.Tensor, groups, n_groups) -> ad.Tensor:
    """Motif-level summary per group: sigmoid of the mean encoded instance."""
    groups = np.asarray(groups, dtype=np.int64)
    counts = np.bincount(groups, minlength=n_groups).astype(encoded.data.dtype)
    if (counts == 0).any():
        raise ValueError("readout: every group needs at least one instance")
    mean = ad.scale_rows(ad.segment_sum(encoded, groups, n_groups), ad.Tensor(1.0 / counts))
    return ad.sigmoid(mean)


def discriminate(encoded: ad.Tensor, summary: ad.Tensor, head: MotifHead) -> ad.Tensor:
    """Bilinear probability sigmoid(e · W_d s) per row pair."""
    scores = ad.reduce_sum(ad.hadamard(ad.matmul(encoded, head.disc_w), summary), axis=1)
    return ad.sigmoid(scores)


@dataclass
class MiBatch:
    """Sampled contrastive batch for one motif over a set of anchor nodes."""

    motif_id: int
    anchor_nodes: np.ndarray    # (G,) nodes with >= 1 instance
    positives: np.ndarray       # (P, 3) anchor-first triples
    negatives: np.ndarray       # (P, 3) matched perturbed triples
    groups: np.ndarray          # (P,) -> index into anchor_nodes
    fallback_count: int = 0

    @property
    def n_groups(self):
        return len(self.anchor_nodes)


def assemble_mi_batch(g, index: MotifInstanceIndex, nodes, motif_id, Q, rng) -> MiBatch | None:
    """Sample up to Q positives plus matched negatives per contributing node.

    Nodes without instances of this motif are skipped; returns None when no
    node in the batch contributes.
    """
    anchors = []
    pos_parts = []
    neg_parts = []
    groups = []
    fallbacks = 0
    for v in nodes:
        v = int(v)
        pos = sample_instances(index, v, motif_id, Q, rng)
        if len(pos) == 0:
            continue
        gi = len(anchors)
        anchors.append(v)
        pos_parts.append(pos)
        for _ in range(len(pos)):
            trio, used_fallback = sample_negative_instance(g, index, v, motif_id, rng)
            neg_parts.append(trio)
            fallbacks += int(used_fallback)
        groups.extend([gi] * len(pos))
    if not anchors:
        return None
    return MiBatch(
        motif_id=motif_id,
        anchor_nodes=np.array(anchors, dtype=np.int64),
        positives=np.concatenate(pos_parts, axis=0),
        negatives=np.stack(neg_parts, axis=0),
        groups=np.array(groups, dtype=np.int64),
        fallback_count=fallbacks,
    )


def motif_mi_loss(gated: ad.Tensor, batch: MiBatch, head: MotifHead):
    """Noise-contrastive loss per contributing anchor node.

    For each anchor with Q' sampled positives:
        -1/(2Q') sum_i [log D(e+_i, s) + log(1 - D(e-_i, s))]
    with s the readout over that anchor's positive instances. Returns the
    (G,) per-node loss tensor; aggregate across motifs by averaging over
    contributing (node, motif) pairs.
    """
    e_pos, _ = encode_instances(gated, batch.positives, head)
    e_neg, _ = encode_instances(gated, batch.negatives, head)
    summary = readout(e_pos, batch.groups, batch.n_groups)
    s_rows = ad.gather_rows(summary, batch.groups)

    d_pos = ad.clip(discriminate(e_pos, s_rows, head), PROB_CLAMP, 1.0 - PROB_CLAMP)
    d_neg = ad.clip(discriminate(e_neg, s_rows, head), PROB_CLAMP, 1.0 - PROB_CLAMP)
    terms = ad.add(ad.log(d_pos), ad.log(ad.add_scalar(ad.scale(d_neg, -1.0), 1.0)))
    sums = ad.segment_sum(terms, batch.groups, batch.n_groups)
    counts = np.bincount(batch.groups, minlength=batch.n_groups).astype(sums.data.dtype)
    return ad.hadamard(sums, ad.Tensor(-1.0 / (2.0 * counts)))


def mi_loss_aggregate(per_node_losses):
    """Plain mean over contributing (node, motif) pairs (unweighted form)."""
    total = None
    count = 0
    for loss_vec in per_node_losses:
        s = ad.reduce_sum(loss_vec)
        total = s if total is None else ad.add(total, s)
        count += loss_vec.data.shape[0]
    if total is None:
        raise ValueError("no contributing (node, motif) pairs")
    return ad.scale(total, 1.0 / count)
