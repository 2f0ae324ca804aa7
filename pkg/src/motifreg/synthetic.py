"""Synthetic graph generators: preferential attachment and the planted-role
benchmark used to exercise attribute co-variation inside triangles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, LabelSet


def generate_ba_graph(n, m, seed) -> Graph:
    """Preferential-attachment graph: complete seed on m nodes, then each new
    node attaches m edges to distinct existing nodes with probability
    proportional to degree.

    At n = m + 1 the result is the complete graph. Total edges:
    C(m, 2) + m (n - m).
    """
    if n <= m:
        raise ValueError(f"need n > m, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    # repeated-endpoint list realizes degree-proportional sampling
    repeated = [v for e in edges for v in e]
    for new in range(m, n):
        if not repeated:  # m == 1 starts from a single edgeless node
            targets = {0}
        else:
            targets = set()
            while len(targets) < m:
                targets.add(repeated[int(rng.integers(len(repeated)))])
        for t in sorted(targets):
            edges.append((t, new))
            repeated.extend((t, new))
    return Graph.from_edges(n, np.array(edges, dtype=np.int32), directed=False)


@dataclass
class PlantedRoleData:
    graph: Graph
    features: np.ndarray
    labels: LabelSet
    ego_nodes: np.ndarray     # the classified gadget centers
    meta: dict


def planted_role_benchmark(
    n_gadgets=64,
    noise=0.4,
    pairs_per_side=2,
    feature_dim=32,
    seed=0,
    label_fraction=0.2,
) -> PlantedRoleData:
    """Two node classes separated only by which attribute sits in triangles.

    Every gadget is one classified ego wired identically in both classes:
    `pairs_per_side` neighbor pairs of attribute color A, as many of color B,
    plus two chain links to the neighboring gadgets. Per class, one color's
    pairs are interconnected (closing triangles through the ego) while the
    other color's neighbors dangle toward plain filler twins, so degree
    sequences, 1-hop attribute multisets and 2-hop attribute multisets all
    coincide across classes up to which color occupies the triangles. Labels
    cover `label_fraction` of egos; the rest are evaluation targets.
    """
    if n_gadgets < 4 or n_gadgets % 2:
        raise ValueError("n_gadgets must be even and >= 4")
    if pairs_per_side < 1:
        raise ValueError("pairs_per_side must be >= 1")
    rng = np.random.default_rng(seed)
    edges = []
    ego_nodes = []
    labels = {}
    node_roles = []   # feature kind per node
    node_gadget = []  # owning gadget per node (theme assignment)
    current_gadget = [0]

    def add_node(kind):
        node_roles.append(kind)
        node_gadget.append(current_gadget[0])
        return len(node_roles) - 1

    chain_anchor_prev = None
    first_ego = None
    classes = rng.permutation([0, 1] * (n_gadgets // 2))
    for gi in range(n_gadgets):
        current_gadget[0] = gi
        cls = int(classes[gi])
        ego = add_node("ego")
        ego_nodes.append(ego)
        labels[ego] = cls
        k = 2 * pairs_per_side
        a = [add_node("colorA") for _ in range(k)]
        b = [add_node("colorB") for _ in range(k)]
        for x in a + b:
            edges.append((ego, x))
        tri, dangle = (a, b) if cls == 0 else (b, a)
        # triangles through the ego on the class color
        for i in range(pairs_per_side):
            edges.append((tri[2 * i], tri[2 * i + 1]))
        # dangling pairs get filler twins so degrees match the triangle side
        for x in dangle:
            edges.append((x, add_node("filler")))
        # chain to the previous gadget through two fillers
        if chain_anchor_prev is not None:
            c1, c2 = add_node("filler"), add_node("filler")
            edges.append((chain_anchor_prev, c1))
            edges.append((c1, c2))
            edges.append((c2, ego))
        else:
            first_ego = ego
        chain_anchor_prev = ego
    # close the ring
    c1, c2 = add_node("filler"), add_node("filler")
    edges.append((chain_anchor_prev, c1))
    edges.append((c1, c2))
    edges.append((c2, first_ego))

    n = len(node_roles)
    g = Graph.from_edges(n, np.array(edges, dtype=np.int32), directed=False)

    block = feature_dim // 4
    base = {
        "ego": 0 * block,
        "colorA": 1 * block,
        "colorB": 2 * block,
        "filler": 3 * block,
    }
    X = rng.normal(0.0, noise, size=(n, feature_dim))
    for v, kind in enumerate(node_roles):
        X[v, base[kind] : base[kind] + block] += 1.0

    ego_nodes = np.array(ego_nodes, dtype=np.int64)
    n_labeled = max(2, int(round(label_fraction * n_gadgets)))
    order = rng.permutation(n_gadgets)
    train_egos = []
    # keep at least one labeled ego per class
    for cls in (0, 1):
        train_egos.append(next(int(ego_nodes[i]) for i in order if labels[int(ego_nodes[i])] == cls))
    for i in order:
        v = int(ego_nodes[i])
        if len(train_egos) >= n_labeled:
            break
        if v not in train_egos:
            train_egos.append(v)

    return PlantedRoleData(
        graph=g,
        features=X,
        labels=LabelSet(labels, n_classes=2),
        ego_nodes=ego_nodes,
        meta={
            "n_gadgets": n_gadgets,
            "noise": noise,
            "seed": seed,
            "train_egos": sorted(train_egos),
        },
    )


def planted_role_split(data: PlantedRoleData, val_fraction=0.25, seed=0):
    """Split over egos: meta train egos, a validation slice, rest test."""
    from .graphs import Split

    rng = np.random.default_rng(seed)
    train = np.array(sorted(data.meta["train_egos"]), dtype=np.int64)
    rest = np.array([v for v in data.ego_nodes if v not in set(train.tolist())], dtype=np.int64)
    rest = rng.permutation(rest)
    n_val = max(2, int(round(val_fraction * len(rest))))
    return Split(
        train=train,
        val=np.sort(rest[:n_val]),
        test=np.sort(rest[n_val:]),
        seed=int(seed),
    )
