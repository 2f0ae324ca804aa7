"""3-node motif catalogs, canonical codes, exact instance indexing, sampling.

A motif is a connected induced pattern over 3 slots, optionally constrained
by node/edge types from a heterogeneous schema. Instances are enumerated
exactly: wedges from a center-pair scan, triangles from an edge/neighbor
join, each connected triple visited once and classified by canonical code
against the catalog.
"""

from __future__ import annotations

import itertools
import json
import pickle
from dataclasses import dataclass

import numpy as np

from .graphs import Graph

_PAIRS_DIR = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))
_PAIRS_UND = ((0, 1), (0, 2), (1, 2))
_PERMS = tuple(itertools.permutations(range(3)))

INDEX_CACHE_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Schema:
    """Heterogeneous type schema: node-type names and permitted typed edges.

    Each permitted edge is (src_type, dst_type, directed); its position in
    `edges` is the schema edge-type id. Graph edge-type files, when present,
    must use these ids.
    """

    node_types: tuple
    edges: tuple

    @property
    def n_types(self):
        return len(self.node_types)

    @staticmethod
    def from_dict(d):
        names = tuple(d.get("node_types", ()))
        if not names:
            raise SchemaError("schema lists no node types")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate node type names")
        index = {n: i for i, n in enumerate(names)}
        edges = []
        seen_pairs = set()
        for e in d.get("edges", ()):
            if e["src"] not in index or e["dst"] not in index:
                raise SchemaError(f"edge references unknown node type: {e}")
            s, t = index[e["src"]], index[e["dst"]]
            directed = bool(e.get("directed", False))
            keys = {(s, t)} if directed else {(s, t), (t, s)}
            if keys & seen_pairs:
                raise SchemaError(f"ambiguous duplicate edge type for pair {e['src']}-{e['dst']}")
            seen_pairs |= keys
            edges.append((s, t, directed))
        if not edges:
            raise SchemaError("schema lists no edge types")
        return Schema(node_types=names, edges=tuple(edges))

    @staticmethod
    def from_json(path):
        with open(path) as fh:
            return Schema.from_dict(json.load(fh))

    def permits(self, src_t, dst_t):
        """Schema edge id permitting an edge src_t -> dst_t, else None.

        Undirected schema edges permit both orientations.
        """
        for i, (s, t, directed) in enumerate(self.edges):
            if (s, t) == (src_t, dst_t):
                return i
            if not directed and (t, s) == (src_t, dst_t):
                return i
        return None


def canonical_code(edges, directed, node_types=None, edge_types=None) -> bytes:
    """Canonical byte string of a 3-slot pattern.

    Identical for all (type-consistent) isomorphic patterns: the encoding
    (node-type bytes then edge bytes over a fixed pair order) is minimized
    over the 6 slot permutations. Edge byte 0 means no edge, otherwise
    1 + edge type (or 1 when untyped).
    """
    pair_order = _PAIRS_DIR if directed else _PAIRS_UND
    emap = {}
    for k, (i, j) in enumerate(edges):
        if edge_types is None or edge_types[k] is None:
            byte = 1
        else:
            byte = min(2 + int(edge_types[k]), 255)
        key = (i, j) if directed else (min(i, j), max(i, j))
        emap[key] = byte
    nt = (0, 0, 0) if node_types is None else tuple(int(t) + 1 for t in node_types)

    best = None
    for p in _PERMS:
        if directed:
            ebytes = tuple(emap.get((p[i], p[j]), 0) for i, j in pair_order)
        else:
            ebytes = tuple(
                emap.get((min(p[i], p[j]), max(p[i], p[j])), 0) for i, j in pair_order
            )
        cand = (nt[p[0]], nt[p[1]], nt[p[2]]) + ebytes
        if best is None or cand < best:
            best = cand
    head = b"D" if directed else b"U"
    return head + bytes(best)


def _is_connected(edges):
    touched = set()
    adj = {0: set(), 1: set(), 2: set()}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
        touched |= {i, j}
    if touched != {0, 1, 2}:
        return False
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == 3


@dataclass(frozen=True)
class MotifSpec:
    """One catalog entry: a connected 3-slot pattern plus optional typing."""

    name: str
    directed: bool
    edges: tuple                 # slot pairs; ordered when directed
    slot_types: tuple | None = None
    edge_types: tuple | None = None
    code: bytes = b""

    def __post_init__(self):
        if not _is_connected(self.edges):
            raise ValueError(f"motif pattern {self.name} is not connected")
        if not self.code:
            object.__setattr__(
                self,
                "code",
                canonical_code(self.edges, self.directed, self.slot_types, self.edge_types),
            )

    @property
    def typed(self):
        return self.slot_types is not None


@dataclass(frozen=True)
class MotifInstance:
    """A concrete matched triple, anchor first."""

    nodes: tuple
    motif_id: int


def _triad_name(bits):
    """Census-style name for a directed 3-node pattern given its 6 edge bits.

    bits follow _PAIRS_DIR order. Suffix convention: D = diverging (a node
    sends both single arcs), U = converging, C = chain; 111D/U says whether
    the lone arc points into or out of the mutual dyad.
    """
    arcs = {p for p, b in zip(_PAIRS_DIR, bits) if b}
    mutual = [frozenset(p) for p in _PAIRS_UND if (p in arcs and (p[1], p[0]) in arcs)]
    asym = [p for p in arcs if (p[1], p[0]) not in arcs]
    m, a = len(mutual), len(asym)
    n = 3 - m - a
    base = f"{m}{a}{n}"
    outdeg = [sum(1 for p in asym if p[0] == i) for i in range(3)]
    indeg = [sum(1 for p in asym if p[1] == i) for i in range(3)]
    if base == "021":
        if max(outdeg) == 2:
            return "021D"
        if max(indeg) == 2:
            return "021U"
        return "021C"
    if base == "030":
        return "030T" if max(outdeg) == 2 else "030C"
    if base == "111":
        dyad = mutual[0]
        _, dst = asym[0]
        return "111D" if dst in dyad else "111U"
    if base == "120":
        third = next(i for i in range(3) if not any(i in d for d in mutual))
        if outdeg[third] == 2:
            return "120D"
        if indeg[third] == 2:
            return "120U"
        return "120C"
    return base  # 201, 210, 300 are unique


_PAPER_DIRECTED_SUBSET = ("021C", "021D", "021U", "030T", "030C")


def builtin_catalog(directed: bool, variant="full"):
    """Built-in untyped catalogs.

    Undirected: the two connected 3-node graphs (wedge, triangle). Directed:
    all 13 weakly-connected non-isomorphic 3-node digraphs ("full"), the
    5-motif single-arc subset used for citation-style graphs ("paper"), or an
    explicit list of census names.
    """
    if not directed:
        return [
            MotifSpec("wedge", False, ((0, 1), (1, 2))),
            MotifSpec("triangle", False, ((0, 1), (0, 2), (1, 2))),
        ]
    by_code = {}
    for mask in range(64):
        bits = [(mask >> i) & 1 for i in range(6)]
        edges = tuple(p for p, b in zip(_PAIRS_DIR, bits) if b)
        if not _is_connected(edges):
            continue
        code = canonical_code(edges, True)
        if code not in by_code:
            by_code[code] = MotifSpec(_triad_name(bits), True, edges, code=code)
    specs = sorted(by_code.values(), key=lambda s: (len(s.edges), s.name))
    if variant == "full":
        return specs
    wanted = _PAPER_DIRECTED_SUBSET if variant == "paper" else tuple(variant)
    by_name = {s.name: s for s in specs}
    missing = [w for w in wanted if w not in by_name]
    if missing:
        raise ValueError(f"unknown directed motif names: {missing}")
    return [by_name[w] for w in wanted]


def typed_catalog(schema: Schema, base=None):
    """All type-consistent slot typings of the base catalog under a schema.

    An assignment is kept when every pattern edge is a permitted schema edge
    (undirected patterns accept either orientation); duplicates collapse by
    canonical code.
    """
    if schema is None or schema.n_types == 0:
        raise SchemaError("typed catalog requires a nonempty schema")
    if base is None:
        has_directed = any(d for _, _, d in schema.edges)
        base = builtin_catalog(directed=has_directed, variant="full")
    out = []
    seen = set()
    for spec in base:
        for assign in itertools.product(range(schema.n_types), repeat=3):
            etypes = []
            ok = True
            for i, j in spec.edges:
                if spec.directed:
                    eid = schema.permits(assign[i], assign[j])
                else:
                    eid = schema.permits(assign[i], assign[j])
                    if eid is None:
                        eid = schema.permits(assign[j], assign[i])
                if eid is None:
                    ok = False
                    break
                etypes.append(eid)
            if not ok:
                continue
            code = canonical_code(spec.edges, spec.directed, assign, tuple(etypes))
            if code in seen:
                continue
            seen.add(code)
            tag = "-".join(schema.node_types[t] for t in assign)
            out.append(
                MotifSpec(
                    f"{spec.name}[{tag}]",
                    spec.directed,
                    spec.edges,
                    slot_types=tuple(assign),
                    edge_types=tuple(etypes),
                    code=code,
                )
            )
    return out


class MotifInstanceIndex:
    """Per (node, motif) catalog of matched instances.

    Each instance {a, b, c} is registered once under each member as anchor;
    the stored rows hold the two non-anchor members (sorted). Immutable after
    construction.
    """

    def __init__(self, n_nodes, catalog, per_node, graph_hash=""):
        self.n_nodes = n_nodes
        self.catalog = list(catalog)
        self.per_node = per_node      # [motif][node] -> (k, 2) int32 array
        self.graph_hash = graph_hash
        self._member_sets = {}

    @property
    def n_motifs(self):
        return len(self.catalog)

    def count(self, v, motif_id):
        return len(self.per_node[motif_id][v])

    def counts_matrix(self):
        """(T, n) instance counts per motif per anchor."""
        return np.array(
            [[len(self.per_node[t][v]) for v in range(self.n_nodes)] for t in range(self.n_motifs)],
            dtype=np.int64,
        )

    def total_counts(self):
        """Distinct instances per motif (each counted once, not per anchor)."""
        anchored = self.counts_matrix().sum(axis=1)
        assert (anchored % 3 == 0).all()
        return anchored // 3

    def instances(self, v, motif_id):
        """All instances anchored at v as an (k, 3) array, anchor first."""
        rows = self.per_node[motif_id][v]
        if len(rows) == 0:
            return np.empty((0, 3), dtype=np.int32)
        out = np.empty((len(rows), 3), dtype=np.int32)
        out[:, 0] = v
        out[:, 1:] = rows
        return out

    def member_key_set(self, v, motif_id):
        """Set of packed (lo * n + hi) companion pairs for anchor v."""
        key = (motif_id, v)
        got = self._member_sets.get(key)
        if got is None:
            n = self.n_nodes
            rows = self.per_node[motif_id][v]
            got = {int(a) * n + int(b) for a, b in rows}
            self._member_sets[key] = got
        return got


def _classify_table(catalog, directed):
    """bits-int -> motif id for every untyped adjacency pattern."""
    code_to_id = {s.code: i for i, s in enumerate(catalog)}
    pair_order = _PAIRS_DIR if directed else _PAIRS_UND
    table = {}
    for mask in range(1 << len(pair_order)):
        edges = tuple(p for p, b in zip(pair_order, [(mask >> i) & 1 for i in range(len(pair_order))]) if b)
        if not _is_connected(edges):
            table[mask] = -1
            continue
        table[mask] = code_to_id.get(canonical_code(edges, directed), -1)
    return table


def build_index(g: Graph, catalog, schema: Schema | None = None) -> MotifInstanceIndex:
    """Exact instance index of every catalog motif in g.

    Connected triples of the symmetrized graph are generated exactly once
    (wedge scan over neighbor pairs of a center; triangle scan over edges
    with ordered common-neighbor join), then classified by canonical code.
    Induced-subgraph semantics throughout: a wedge inside a triangle is not
    a wedge instance.
    """
    if not catalog:
        raise ValueError("catalog is empty")
    typed = catalog[0].typed
    if typed and schema is None:
        raise SchemaError("typed catalog requires the schema used to build it")
    n = g.n_nodes
    sym = [set(map(int, a)) for a in g.neighbors]
    if g.directed:
        out_sets = [set(map(int, a)) for a in g.out_neighbors]
    else:
        out_sets = sym

    directed = g.directed
    if not typed:
        table = _classify_table(catalog, directed)
    memo = {}
    code_to_id = {s.code: i for i, s in enumerate(catalog)}
    ntypes = g.node_type

    def edge_byte(u, v):
        # Edge-type id for an existing edge u->v, as used in typed codes.
        if g.edge_type is not None:
            return g.edge_type_of(u, v)
        eid = schema.permits(int(ntypes[u]), int(ntypes[v]))
        if eid is None and not directed:
            eid = schema.permits(int(ntypes[v]), int(ntypes[u]))
        return 253 if eid is None else eid  # 253 -> sentinel byte, never in catalog

    pair_order = _PAIRS_DIR if directed else _PAIRS_UND

    def classify(a, b, c):
        trio = (a, b, c)
        bits = 0
        adj = out_sets if directed else sym
        for k, (i, j) in enumerate(pair_order):
            if trio[j] in adj[trio[i]]:
                bits |= 1 << k
        if not typed:
            return table[bits]
        edges = []
        etypes = []
        for k, (i, j) in enumerate(pair_order):
            if bits & (1 << k):
                edges.append((i, j))
                etypes.append(edge_byte(trio[i], trio[j]))
        tkey = (bits, int(ntypes[a]), int(ntypes[b]), int(ntypes[c]), tuple(etypes))
        hit = memo.get(tkey)
        if hit is not None:
            return hit
        code = canonical_code(tuple(edges), directed, tkey[1:4], tuple(etypes))
        mid = code_to_id.get(code, -1)
        memo[tkey] = mid
        return mid

    per_node = [[[] for _ in range(n)] for _ in range(len(catalog))]

    def register(mid, a, b, c):
        per_node[mid][a].append((min(b, c), max(b, c)))
        per_node[mid][b].append((min(a, c), max(a, c)))
        per_node[mid][c].append((min(a, b), max(a, b)))

    # Wedge-shaped triples: center c with two non-adjacent neighbors.
    for c in range(n):
        neigh = sorted(sym[c])
        for ii in range(len(neigh)):
            u = neigh[ii]
            su = sym[u]
            for jj in range(ii + 1, len(neigh)):
                w = neigh[jj]
                if w in su:
                    continue
                mid = classify(u, c, w)
                if mid >= 0:
                    register(mid, u, c, w)

    # Triangle-shaped triples: edge (u, w), common neighbor x with u < w < x.
    for u in range(n):
        su = sym[u]
        for w in sorted(su):
            if w <= u:
                continue
            sw = sym[w]
            small, big = (su, sw) if len(su) < len(sw) else (sw, su)
            for x in small:
                if x > w and x in big:
                    mid = classify(u, w, x)
                    if mid >= 0:
                        register(mid, u, w, x)

    arrays = [
        [
            np.array(lst, dtype=np.int32).reshape(-1, 2) if lst else np.empty((0, 2), dtype=np.int32)
            for lst in per_node[t]
        ]
        for t in range(len(catalog))
    ]
    return MotifInstanceIndex(n, catalog, arrays, graph_hash=g.content_hash())


def sample_instances(index: MotifInstanceIndex, v, motif_id, Q, rng) -> np.ndarray:
    """min(Q, available) distinct instances of the motif anchored at v.

    Uniform without replacement; (k, 3) rows with v first; empty when the
    node has no instances.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    rows = index.per_node[motif_id][v]
    k = len(rows)
    if k == 0:
        return np.empty((0, 3), dtype=np.int32)
    if k > Q:
        sel = rng.choice(k, size=Q, replace=False)
        rows = rows[np.sort(sel)]
    out = np.empty((len(rows), 3), dtype=np.int32)
    out[:, 0] = v
    out[:, 1:] = rows
    return out


def sample_negative_instance(g: Graph, index: MotifInstanceIndex, v, motif_id, rng, retries=50):
    """A perturbed companion pair for anchor v: (triple, used_fallback).

    The sampled (v, u, w) node-set is never an observed instance of this
    motif anchored at v; the triple only supplies attribute rows, so no
    topology is imposed on the companions. After `retries` misses the
    sampler falls back to random non-neighbors of v (or, in degenerate
    graphs with too few non-neighbors, any two distinct other nodes) and
    flags the result.
    """
    n = g.n_nodes
    pos = index.member_key_set(v, motif_id)
    if not pos:
        raise ValueError(f"node {v} anchors no instances of motif {motif_id}")
    for _ in range(retries):
        u = int(rng.integers(n))
        w = int(rng.integers(n))
        if u == w or u == v or w == v:
            continue
        lo, hi = (u, w) if u < w else (w, u)
        if lo * n + hi not in pos:
            return np.array([v, u, w], dtype=np.int32), False
    non_neigh = [x for x in range(n) if x != v and x not in set(map(int, g.neighbors[v]))]
    if len(non_neigh) >= 2:
        u, w = rng.choice(len(non_neigh), size=2, replace=False)
        return np.array([v, non_neigh[int(u)], non_neigh[int(w)]], dtype=np.int32), True
    others = [x for x in range(n) if x != v]
    u, w = rng.choice(len(others), size=2, replace=False)
    return np.array([v, others[int(u)], others[int(w)]], dtype=np.int32), True


def save_index(index: MotifInstanceIndex, path):
    payload = {
        "version": INDEX_CACHE_VERSION,
        "graph_hash": index.graph_hash,
        "n_nodes": index.n_nodes,
        "catalog": [
            (s.name, s.directed, s.edges, s.slot_types, s.edge_types, s.code)
            for s in index.catalog
        ],
        "per_node": index.per_node,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)


def load_index(path, expect_graph: Graph | None = None) -> MotifInstanceIndex:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload["version"] != INDEX_CACHE_VERSION:
        raise ValueError(f"unsupported index cache version {payload['version']}")
    if expect_graph is not None and payload["graph_hash"] != expect_graph.content_hash():
        raise ValueError("index cache does not match the graph (content hash differs)")
    catalog = [
        MotifSpec(name, d, edges, slot_types=st, edge_types=et, code=code)
        for name, d, edges, st, et, code in payload["catalog"]
    ]
    return MotifInstanceIndex(
        payload["n_nodes"], catalog, payload["per_node"], graph_hash=payload["graph_hash"]
    )
