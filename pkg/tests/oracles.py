"""Independent brute-force oracles used by the test suite.

Deliberately naive: all C(n,3) triples, per-triple isomorphism by trying all
six slot permutations against the motif pattern directly. No canonical codes,
no shared code with the enumeration under test.
"""

import itertools

import numpy as np


def _adj_sets(g):
    out = [set(map(int, a)) for a in g.out_neighbors]
    sym = [set(map(int, a)) for a in g.neighbors]
    return out, sym


def spec_edge_set(spec):
    if spec.directed:
        return set(spec.edges)
    return {(min(i, j), max(i, j)) for i, j in spec.edges}


def triple_matches(g, spec, trio, schema=None, _adj=None):
    """Is the induced subgraph on trio (type-consistently) isomorphic to spec?"""
    out_sets, sym_sets = _adj if _adj is not None else _adj_sets(g)
    spec_edges = spec_edge_set(spec)
    spec_etype = {}
    if spec.edge_types is not None:
        for k, (i, j) in enumerate(spec.edges):
            key = (i, j) if spec.directed else (min(i, j), max(i, j))
            spec_etype[key] = spec.edge_types[k]
    pairs = (
        list(itertools.permutations(range(3), 2))
        if g.directed
        else list(itertools.combinations(range(3), 2))
    )
    for perm in itertools.permutations(range(3)):
        assigned = [trio[perm[s]] for s in range(3)]
        if spec.slot_types is not None:
            if any(int(g.node_type[assigned[s]]) != spec.slot_types[s] for s in range(3)):
                continue
        ok = True
        for i, j in pairs:
            u, v = assigned[i], assigned[j]
            present = v in out_sets[u] or (not g.directed and v in sym_sets[u])
            key = (i, j) if spec.directed else (min(i, j), max(i, j))
            want = key in spec_edges
            if present != want:
                ok = False
                break
            if present and spec_etype:
                if g.edge_type is not None:
                    et = g.edge_type_of(u, v)
                else:
                    et = schema.permits(int(g.node_type[u]), int(g.node_type[v]))
                    if et is None and not g.directed:
                        et = schema.permits(int(g.node_type[v]), int(g.node_type[u]))
                if et != spec_etype[key]:
                    ok = False
                    break
        if ok:
            return True
    return False


def brute_force_instances(g, catalog, schema=None):
    """Per-motif set of matched node-sets over all C(n,3) triples."""
    adj = _adj_sets(g)
    found = [set() for _ in catalog]
    for trio in itertools.combinations(range(g.n_nodes), 3):
        for mid, spec in enumerate(catalog):
            if triple_matches(g, spec, trio, schema=schema, _adj=adj):
                found[mid].add(frozenset(trio))
    return found


def index_instance_sets(index):
    """Same shape as brute_force_instances, read from a built index."""
    out = []
    for t in range(index.n_motifs):
        s = set()
        for v in range(index.n_nodes):
            for a, b in index.per_node[t][v]:
                s.add(frozenset((v, int(a), int(b))))
        out.append(s)
    return out


def bfs_within(g, seeds, k):
    """Plain BFS truncation oracle for k-hop neighborhoods."""
    dist = {int(s): 0 for s in seeds}
    frontier = list(dist)
    d = 0
    while frontier and d < k:
        d += 1
        nxt = []
        for u in frontier:
            for v in g.neighbors[u]:
                v = int(v)
                if v not in dist:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return set(dist)


def random_graph(n, p, seed, directed=False):
    """Erdos-Renyi edge list -> Graph (no self-loops, deduped)."""
    from motifreg.graphs import Graph

    rng = np.random.default_rng(seed)
    edges = []
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            if not directed and u > v:
                continue
            if rng.random() < p:
                edges.append((u, v))
    return Graph.from_edges(n, np.array(edges, dtype=np.int32).reshape(-1, 2), directed)
