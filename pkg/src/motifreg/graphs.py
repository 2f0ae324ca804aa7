"""Immutable attributed graphs: loading, validation, components, splits, k-hop.

Node ids are dense integers assigned in first-appearance order of the edge
list. Undirected graphs store each edge once; directed graphs keep both out-
and in-neighbor lists plus a symmetrized view used by message passing and
k-hop traversal.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .rng import substream


class GraphFormatError(ValueError):
    """Malformed input file (carries the offending line number when known)."""


class GraphBoundsError(ValueError):
    """A node or class id falls outside the graph's valid range."""


def _build_adjacency(n, pairs):
    """Sorted neighbor arrays per node from an iterable of (src, dst)."""
    neigh = [[] for _ in range(n)]
    for u, v in pairs:
        neigh[u].append(v)
    return [np.array(sorted(a), dtype=np.int32) for a in neigh]


@dataclass(frozen=True)
class Graph:
    """Static sparse graph with optional node/edge type maps.

    `edges` holds each undirected edge once as (min, max); directed edges as
    (src, dst). `neighbors` is the symmetrized adjacency used by aggregation
    and traversal; `out_neighbors`/`in_neighbors` respect direction and back
    motif matching on directed graphs.
    """

    n_nodes: int
    edges: np.ndarray            # (m, 2) int32
    directed: bool
    node_type: np.ndarray | None = None   # (n,) int32
    edge_type: np.ndarray | None = None   # (m,) int32
    raw_ids: list[str] | None = None      # original token per dense id
    neighbors: list = field(default_factory=list, repr=False)
    out_neighbors: list = field(default_factory=list, repr=False)
    in_neighbors: list = field(default_factory=list, repr=False)

    @staticmethod
    def from_edges(n_nodes, edges, directed, node_type=None, edge_type=None, raw_ids=None):
        edges = np.asarray(edges, dtype=np.int32).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
            raise GraphBoundsError(
                f"edge endpoint out of range [0, {n_nodes}): {edges.min()}..{edges.max()}"
            )
        if not directed:
            edges = np.sort(edges, axis=1)
        sym = set()
        for u, v in edges:
            if u == v:
                raise GraphFormatError("self-loop survived construction")
            sym.add((int(u), int(v)))
            sym.add((int(v), int(u)))
        neighbors = _build_adjacency(n_nodes, sym)
        if directed:
            out_n = _build_adjacency(n_nodes, ((int(u), int(v)) for u, v in edges))
            in_n = _build_adjacency(n_nodes, ((int(v), int(u)) for u, v in edges))
        else:
            out_n = in_n = neighbors
        if node_type is not None:
            node_type = np.asarray(node_type, dtype=np.int32)
            if node_type.shape != (n_nodes,):
                raise GraphBoundsError("node_type must cover every node")
        if edge_type is not None:
            edge_type = np.asarray(edge_type, dtype=np.int32)
            if edge_type.shape != (len(edges),):
                raise GraphBoundsError("edge_type must cover every edge")
        return Graph(
            n_nodes=n_nodes,
            edges=edges,
            directed=directed,
            node_type=node_type,
            edge_type=edge_type,
            raw_ids=raw_ids,
            neighbors=neighbors,
            out_neighbors=out_n,
            in_neighbors=in_n,
        )

    @property
    def n_edges(self):
        return len(self.edges)

    def degree(self, v):
        return len(self.neighbors[v])

    def degrees(self):
        return np.array([len(a) for a in self.neighbors], dtype=np.int64)

    def has_edge(self, u, v):
        """Directed edge u->v (or undirected u-v) present?"""
        arr = self.out_neighbors[u]
        i = np.searchsorted(arr, v)
        return i < len(arr) and arr[i] == v

    def edge_type_of(self, u, v):
        """Type id of edge u->v (undirected: of {u,v}); None if untyped."""
        if self.edge_type is None:
            return None
        lut = getattr(self, "_edge_lookup", None)
        if lut is None:
            lut = {}
            for i, (a, b) in enumerate(self.edges):
                lut[(int(a), int(b))] = int(self.edge_type[i])
                if not self.directed:
                    lut[(int(b), int(a))] = int(self.edge_type[i])
            object.__setattr__(self, "_edge_lookup", lut)
        return lut[(u, v)]

    def content_hash(self) -> str:
        """Stable hash of the graph's full content; keys index caches."""
        h = hashlib.sha256()
        h.update(f"{self.n_nodes} {int(self.directed)}\n".encode())
        order = np.lexsort((self.edges[:, 1], self.edges[:, 0])) if self.n_edges else []
        for i in order:
            u, v = self.edges[i]
            t = -1 if self.edge_type is None else int(self.edge_type[i])
            h.update(f"{u} {v} {t}\n".encode())
        if self.node_type is not None:
            h.update(self.node_type.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class LabelSet:
    """Partial node -> class map with a fixed class count."""

    labels: dict
    n_classes: int

    def __post_init__(self):
        if not self.labels:
            raise GraphBoundsError("labeled set is empty")
        for v, c in self.labels.items():
            if not (0 <= c < self.n_classes):
                raise GraphBoundsError(f"class id {c} for node {v} not in [0, {self.n_classes})")

    def nodes(self):
        return np.array(sorted(self.labels), dtype=np.int64)

    def as_array(self, n_nodes):
        """Dense (n,) array with -1 for unlabeled nodes."""
        y = np.full(n_nodes, -1, dtype=np.int64)
        for v, c in self.labels.items():
            y[v] = c
        return y


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int


def load_graph(edge_list_path, directed=False, node_type_path=None, return_warnings=False):
    """Parse a whitespace edge list ("src dst [edge_type]", '#' comments).

    Self-loops are dropped (counted), duplicate edges deduplicated. Dense node
    ids follow first appearance in the file. The optional node-type file holds
    "node type" rows over the same raw ids.
    """
    ids = {}
    raw_ids = []

    def intern(token):
        if token not in ids:
            ids[token] = len(raw_ids)
            raw_ids.append(token)
        return ids[token]

    edges = []
    etypes = []
    seen = set()
    self_loops = 0
    any_etype = None
    with open(edge_list_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(
                    f"{edge_list_path}:{lineno}: expected 'src dst [edge_type]', got {len(parts)} fields"
                )
            u, v = intern(parts[0]), intern(parts[1])
            if len(parts) == 3:
                try:
                    et = int(parts[2])
                except ValueError as exc:
                    raise GraphFormatError(
                        f"{edge_list_path}:{lineno}: edge type must be an integer"
                    ) from exc
            else:
                et = None
            if any_etype is None:
                any_etype = et is not None
            elif any_etype != (et is not None):
                raise GraphFormatError(
                    f"{edge_list_path}:{lineno}: edge types must be given for all edges or none"
                )
            if u == v:
                self_loops += 1
                continue
            key = (u, v) if directed else (min(u, v), max(u, v))
            if key in seen:
                continue
            seen.add(key)
            edges.append(key)
            if et is not None:
                etypes.append(et)
    n = len(raw_ids)
    if n == 0:
        raise GraphFormatError(f"{edge_list_path}: no nodes found")

    node_type = None
    if node_type_path is not None:
        node_type = np.full(n, -1, dtype=np.int32)
        with open(node_type_path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise GraphFormatError(f"{node_type_path}:{lineno}: expected 'node type'")
                if parts[0] not in ids:
                    raise GraphBoundsError(f"{node_type_path}:{lineno}: unknown node {parts[0]}")
                node_type[ids[parts[0]]] = int(parts[1])
        if (node_type < 0).any():
            missing = raw_ids[int(np.argmin(node_type))]
            raise GraphBoundsError(f"node type map is not total (node {missing} untyped)")

    g = Graph.from_edges(
        n, np.array(edges, dtype=np.int32).reshape(-1, 2), directed,
        node_type=node_type,
        edge_type=np.array(etypes, dtype=np.int32) if etypes else None,
        raw_ids=raw_ids,
    )
    if return_warnings:
        return g, {"self_loops_dropped": self_loops}
    return g


def save_graph(g: Graph, edge_list_path):
    """Write the edge list back out; load_graph(save_graph(g)) == g."""
    with open(edge_list_path, "w") as fh:
        named = g.raw_ids if g.raw_ids is not None else [str(i) for i in range(g.n_nodes)]
        for i, (u, v) in enumerate(g.edges):
            if g.edge_type is not None:
                fh.write(f"{named[u]} {named[v]} {g.edge_type[i]}\n")
            else:
                fh.write(f"{named[u]} {named[v]}\n")


def load_features(path, g: Graph):
    """Dense CSV (row i = node i) or sparse triplet "node col value" features."""
    with open(path) as fh:
        first = fh.readline()
    if "," in first:
        X = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        if X.shape[0] != g.n_nodes:
            raise GraphBoundsError(f"feature rows {X.shape[0]} != n_nodes {g.n_nodes}")
    else:
        ids = {t: i for i, t in enumerate(g.raw_ids)} if g.raw_ids else None
        rows, cols, vals = [], [], []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise GraphFormatError(f"{path}:{lineno}: expected 'node col value'")
                node = ids[parts[0]] if ids else int(parts[0])
                rows.append(node)
                cols.append(int(parts[1]))
                vals.append(float(parts[2]))
        if not rows:
            raise GraphFormatError(f"{path}: no feature entries")
        F = max(cols) + 1
        X = np.zeros((g.n_nodes, F), dtype=np.float64)
        X[rows, cols] = vals
    if not np.isfinite(X).all():
        raise GraphBoundsError("features contain non-finite values")
    return X


def load_labels(path, g: Graph):
    """"node class" rows over the graph's raw ids -> LabelSet."""
    ids = {t: i for i, t in enumerate(g.raw_ids)} if g.raw_ids else None
    labels = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 'node class'")
            if ids is not None:
                if parts[0] not in ids:
                    raise GraphBoundsError(f"{path}:{lineno}: unknown node {parts[0]}")
                node = ids[parts[0]]
            else:
                node = int(parts[0])
            labels[node] = int(parts[1])
    if not labels:
        raise GraphFormatError(f"{path}: no labels found")
    return LabelSet(labels=labels, n_classes=max(labels.values()) + 1)


def connected_components(g: Graph):
    """Weakly-connected components as lists of node ids (BFS)."""
    seen = np.zeros(g.n_nodes, dtype=bool)
    comps = []
    for s in range(g.n_nodes):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in g.neighbors[u]:
                    v = int(v)
                    if not seen[v]:
                        seen[v] = True
                        comp.append(v)
                        nxt.append(v)
            frontier = nxt
        comps.append(comp)
    return comps


def largest_connected_component(g: Graph, features=None, labels: LabelSet | None = None):
    """Induced subgraph on the largest weakly-connected component.

    Size ties break toward the component containing the lowest original node
    id. Node ids are relabeled contiguously preserving original order;
    features and labels are remapped consistently.
    """
    if g.n_nodes == 0:
        raise GraphBoundsError("empty graph has no components")
    comps = connected_components(g)
    best = max(comps, key=lambda c: (len(c), -min(c)))
    keep = np.array(sorted(best), dtype=np.int64)
    remap = {int(old): new for new, old in enumerate(keep)}
    in_comp = np.zeros(g.n_nodes, dtype=bool)
    in_comp[keep] = True

    new_edges = []
    new_etypes = []
    for i, (u, v) in enumerate(g.edges):
        if in_comp[u] and in_comp[v]:
            new_edges.append((remap[int(u)], remap[int(v)]))
            if g.edge_type is not None:
                new_etypes.append(int(g.edge_type[i]))
    sub = Graph.from_edges(
        len(keep),
        np.array(new_edges, dtype=np.int32).reshape(-1, 2),
        g.directed,
        node_type=g.node_type[keep] if g.node_type is not None else None,
        edge_type=np.array(new_etypes, dtype=np.int32) if new_etypes else None,
        raw_ids=[g.raw_ids[i] for i in keep] if g.raw_ids else None,
    )
    new_feats = features[keep] if features is not None else None
    new_labels = None
    if labels is not None:
        kept = {remap[v]: c for v, c in labels.labels.items() if in_comp[v]}
        new_labels = LabelSet(labels=kept, n_classes=labels.n_classes)
    return sub, new_feats, new_labels


def make_splits(labels: LabelSet, train_ratio, val_ratio, seed) -> Split:
    """Deterministic uniform train/val/test partition of the labeled nodes."""
    if not (0 < train_ratio and 0 < val_ratio and train_ratio + val_ratio < 1):
        raise ValueError(f"ratios must be positive and sum below 1, got {train_ratio}/{val_ratio}")
    nodes = labels.nodes()
    perm = substream(int(seed), "split").permutation(nodes)
    n_train = int(len(nodes) * train_ratio)
    n_val = int(len(nodes) * val_ratio)
    return Split(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train : n_train + n_val]),
        test=np.sort(perm[n_train + n_val :]),
        seed=int(seed),
    )


def khop_neighborhood(g: Graph, seeds, k: int) -> set:
    """Nodes reachable from `seeds` within k undirected hops (seeds included)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    reached = set(int(s) for s in seeds)
    frontier = set(reached)
    for _ in range(k):
        nxt = set()
        for u in frontier:
            for v in g.neighbors[u]:
                v = int(v)
                if v not in reached:
                    reached.add(v)
                    nxt.add(v)
        if not nxt:
            break
        frontier = nxt
    return reached
