import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motifreg.graphs import Graph
from motifreg.motifs import (
    MotifSpec,
    Schema,
    SchemaError,
    build_index,
    builtin_catalog,
    canonical_code,
    load_index,
    sample_instances,
    sample_negative_instance,
    save_index,
    typed_catalog,
)

from oracles import brute_force_instances, index_instance_sets


def K(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], False)


# ---------------------------------------------------------------- canonical codes

def test_code_invariant_under_relabeling():
    # wedge a-b-c written two ways
    c1 = canonical_code(((0, 1), (1, 2)), directed=False)
    c2 = canonical_code(((2, 1), (1, 0)), directed=False)
    assert c1 == c2


def test_wedge_and_triangle_codes_differ():
    w = canonical_code(((0, 1), (1, 2)), directed=False)
    t = canonical_code(((0, 1), (0, 2), (1, 2)), directed=False)
    assert w != t


def test_directed_cycle_single_code():
    import itertools

    base = [(0, 1), (1, 2), (2, 0)]
    codes = set()
    for p in itertools.permutations(range(3)):
        codes.add(canonical_code(tuple((p[i], p[j]) for i, j in base), directed=True))
    assert len(codes) == 1


def test_typed_codes_separate_type_placements():
    w = ((0, 1), (1, 2))
    a = canonical_code(w, False, node_types=(0, 1, 0))
    b = canonical_code(w, False, node_types=(0, 0, 1))
    assert a != b
    # center/leaf symmetric relabeling keeps the code
    c = canonical_code(((2, 1), (1, 0)), False, node_types=(0, 1, 0))
    assert a == c


# ---------------------------------------------------------------- catalogs

def test_undirected_catalog_is_wedge_triangle():
    cat = builtin_catalog(directed=False)
    assert [s.name for s in cat] == ["wedge", "triangle"]
    assert len({s.code for s in cat}) == 2


def test_directed_full_catalog_has_13_motifs():
    # oracle: enumerate all 64 digraphs on 3 labeled nodes, keep weakly
    # connected ones, dedupe by orbit under the 6 relabelings
    import itertools

    pairs = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    reps = set()
    for mask in range(64):
        edges = frozenset(p for k, p in enumerate(pairs) if mask & (1 << k))
        touched = {x for e in edges for x in e}
        if touched != {0, 1, 2}:
            continue
        und = {frozenset(e) for e in edges}
        # connectivity on 3 nodes: every node touched and not a split pair
        if len(und) == 1:
            continue
        orbit = []
        for p in itertools.permutations(range(3)):
            orbit.append(frozenset((p[i], p[j]) for i, j in edges))
        reps.add(min(orbit, key=lambda s: sorted(s)))
    cat = builtin_catalog(directed=True, variant="full")
    assert len(cat) == len(reps) == 13
    assert len({s.code for s in cat}) == 13


def test_directed_paper_subset():
    cat = builtin_catalog(directed=True, variant="paper")
    assert [s.name for s in cat] == ["021C", "021D", "021U", "030T", "030C"]
    # all single-arc patterns: no mutual dyads
    for s in cat:
        assert all((j, i) not in s.edges for i, j in s.edges)


def test_catalog_by_names():
    cat = builtin_catalog(directed=True, variant=["030C", "300"])
    assert [s.name for s in cat] == ["030C", "300"]
    with pytest.raises(ValueError):
        builtin_catalog(directed=True, variant=["nope"])


def test_disconnected_pattern_rejected():
    with pytest.raises(ValueError):
        MotifSpec("bad", False, ((0, 1),))


# ---------------------------------------------------------------- typed catalogs

DBLP = Schema.from_dict(
    {
        "node_types": ["A", "P", "V"],
        "edges": [
            {"src": "A", "dst": "P"},
            {"src": "P", "dst": "V"},
            {"src": "P", "dst": "P", "directed": True},
        ],
    }
)


def test_vacuous_typing_matches_base_count():
    schema = Schema.from_dict(
        {"node_types": ["X"], "edges": [{"src": "X", "dst": "X"}]}
    )
    base = builtin_catalog(directed=False)
    typed = typed_catalog(schema, base)
    assert len(typed) == len(base)


def test_dblp_wedges_include_apv_exclude_av():
    base = builtin_catalog(directed=False)
    typed = typed_catalog(DBLP, base)
    tags = {tuple(s.slot_types) for s in typed}
    # A-P-V wedge present in some slot order
    assert any(sorted(t) == [0, 1, 2] for t in tags)
    # no motif places an A-V edge anywhere
    for s in typed:
        for i, j in s.edges:
            pair = {s.slot_types[i], s.slot_types[j]}
            assert pair != {0, 2}, f"{s.name} has an A-V edge"


def test_typed_catalog_matches_exhaustive_assignment_oracle():
    # 2-type star schema: hub H connects to leaves L, no L-L or H-H edges
    schema = Schema.from_dict(
        {"node_types": ["H", "L"], "edges": [{"src": "H", "dst": "L"}]}
    )
    base = builtin_catalog(directed=False)
    typed = typed_catalog(schema, base)

    import itertools

    expected = set()
    for spec in base:
        for assign in itertools.product(range(2), repeat=3):
            if all({assign[i], assign[j]} == {0, 1} for i, j in spec.edges):
                etypes = tuple(
                    schema.permits(assign[i], assign[j]) if schema.permits(assign[i], assign[j]) is not None
                    else schema.permits(assign[j], assign[i])
                    for i, j in spec.edges
                )
                expected.add(canonical_code(spec.edges, False, assign, etypes))
    assert {s.code for s in typed} == expected
    # triangle needs an edge between equal types -> impossible here
    assert all(s.name.startswith("wedge") for s in typed)


def test_empty_schema_rejected():
    with pytest.raises(SchemaError):
        Schema.from_dict({"node_types": [], "edges": []})
    with pytest.raises(SchemaError):
        typed_catalog(None)


def test_ambiguous_schema_rejected():
    with pytest.raises(SchemaError):
        Schema.from_dict(
            {
                "node_types": ["A", "B"],
                "edges": [{"src": "A", "dst": "B"}, {"src": "B", "dst": "A"}],
            }
        )


# ---------------------------------------------------------------- index building

def test_k3_each_node_one_triangle_no_wedges():
    cat = builtin_catalog(directed=False)
    idx = build_index(K(3), cat)
    for v in range(3):
        assert idx.count(v, 0) == 0  # induced semantics: no wedge in a triangle
        assert idx.count(v, 1) == 1


def test_star_wedge_counts():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], False)
    cat = builtin_catalog(directed=False)
    idx = build_index(g, cat)
    assert idx.count(0, 0) == 3
    for leaf in (1, 2, 3):
        assert idx.count(leaf, 0) == 2
    assert idx.total_counts().tolist() == [3, 0]


def test_k4_triangle_counts():
    cat = builtin_catalog(directed=False)
    idx = build_index(K(4), cat)
    assert idx.total_counts()[1] == 4
    for v in range(4):
        assert idx.count(v, 1) == 3


def test_index_matches_oracle_small_er_graphs():
    from oracles import random_graph

    cat_u = builtin_catalog(directed=False)
    cat_d = builtin_catalog(directed=True, variant="full")
    for seed in range(6):
        for p in (0.2, 0.5):
            gu = random_graph(9, p, seed=seed)
            assert index_instance_sets(build_index(gu, cat_u)) == brute_force_instances(gu, cat_u)
            gd = random_graph(9, p, seed=100 + seed, directed=True)
            assert index_instance_sets(build_index(gd, cat_d)) == brute_force_instances(gd, cat_d)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=3, max_value=8),
    p=st.sampled_from([0.2, 0.4, 0.7]),
    seed=st.integers(min_value=0, max_value=10_000),
    directed=st.booleans(),
)
def test_index_equals_oracle_property(n, p, seed, directed):
    from oracles import random_graph

    g = random_graph(n, p, seed=seed, directed=directed)
    cat = builtin_catalog(directed=directed, variant="full" if directed else None) \
        if directed else builtin_catalog(directed=False)
    idx = build_index(g, cat)
    assert index_instance_sets(idx) == brute_force_instances(g, cat)


def test_anchor_symmetry_and_uniqueness():
    from oracles import random_graph

    g = random_graph(12, 0.35, seed=4)
    idx = build_index(g, builtin_catalog(directed=False))
    for t in range(idx.n_motifs):
        seen = {}
        for v in range(g.n_nodes):
            rows = idx.per_node[t][v]
            keys = {(int(a), int(b)) for a, b in rows}
            assert len(keys) == len(rows)  # uniqueness per (v, t)
            for a, b in rows:
                trio = frozenset((v, int(a), int(b)))
                seen.setdefault(trio, set()).add(v)
        for trio, anchors in seen.items():
            assert anchors == set(trio)  # registered under exactly its members


def test_typed_index_matches_typed_oracle():
    from oracles import random_graph

    rng = np.random.default_rng(0)
    for seed in range(4):
        g0 = random_graph(9, 0.4, seed=40 + seed)
        ntypes = rng.integers(0, 2, size=9).astype(np.int32)
        g = Graph.from_edges(9, g0.edges, False, node_type=ntypes)
        schema = Schema.from_dict(
            {
                "node_types": ["H", "L"],
                "edges": [{"src": "H", "dst": "L"}, {"src": "H", "dst": "H"}],
            }
        )
        cat = typed_catalog(schema, builtin_catalog(directed=False))
        idx = build_index(g, cat, schema=schema)
        assert index_instance_sets(idx) == brute_force_instances(g, cat, schema=schema)
        # every matched instance satisfies its spec's slot types
        for t, spec in enumerate(cat):
            for v in range(g.n_nodes):
                for row in idx.instances(v, t):
                    got = sorted(int(ntypes[x]) for x in row)
                    assert got == sorted(spec.slot_types)


# ---------------------------------------------------------------- sampling

def test_sample_clamps_to_availability():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], False)
    idx = build_index(g, builtin_catalog(directed=False))
    rng = np.random.default_rng(0)
    got = sample_instances(idx, 0, 0, Q=20, rng=rng)
    assert got.shape == (3, 3)
    assert (got[:, 0] == 0).all()


def test_sample_distinct_and_bounded():
    g = K(8)  # every node anchors C(7,2)=21 triangles
    idx = build_index(g, builtin_catalog(directed=False))
    rng = np.random.default_rng(1)
    got = sample_instances(idx, 0, 1, Q=10, rng=rng)
    assert got.shape == (10, 3)
    assert len({tuple(sorted(r)) for r in got.tolist()}) == 10


def test_sample_uniform_chi_square():
    g = K(7)  # 15 triangle instances per anchor
    idx = build_index(g, builtin_catalog(directed=False))
    rng = np.random.default_rng(7)
    k = idx.count(0, 1)
    draws = 20_000
    q = 3
    counts = np.zeros(k)
    for _ in range(draws):
        got = sample_instances(idx, 0, 1, Q=q, rng=rng)
        for row in got:
            a, b = sorted((int(row[1]), int(row[2])))
            counts[[i for i, (x, y) in enumerate(idx.per_node[1][0]) if (x, y) == (a, b)][0]] += 1
    expect = draws * q / k
    sigma = np.sqrt(draws * (q / k) * (1 - q / k))
    assert np.abs(counts - expect).max() < 3 * sigma


def test_negative_never_hits_positive_set():
    from oracles import random_graph

    g = random_graph(14, 0.3, seed=9)
    idx = build_index(g, builtin_catalog(directed=False))
    rng = np.random.default_rng(3)
    v = next(u for u in range(g.n_nodes) if idx.count(u, 0) > 0)
    pos = {frozenset((v, int(a), int(b))) for a, b in idx.per_node[0][v]}
    for _ in range(10_000):
        trio, _ = sample_negative_instance(g, idx, v, 0, rng)
        assert frozenset(map(int, trio)) not in pos
        assert trio[0] == v and len(set(trio.tolist())) == 3


def test_negative_exhaustion_fallback_on_3_node_triangle():
    idx = build_index(K(3), builtin_catalog(directed=False))
    rng = np.random.default_rng(0)
    trio, fallback = sample_negative_instance(K(3), idx, 0, 1, rng)
    assert fallback is True
    assert sorted(trio.tolist()) == [0, 1, 2]


def test_negative_requires_positive_anchor():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], False)
    idx = build_index(g, builtin_catalog(directed=False))
    with pytest.raises(ValueError):
        sample_negative_instance(g, idx, 0, 1, np.random.default_rng(0))  # no triangles


# ---------------------------------------------------------------- persistence

def test_index_cache_roundtrip(tmp_path):
    from oracles import random_graph

    g = random_graph(10, 0.3, seed=5)
    idx = build_index(g, builtin_catalog(directed=False))
    path = tmp_path / "index.bin"
    save_index(idx, path)
    idx2 = load_index(path, expect_graph=g)
    assert index_instance_sets(idx2) == index_instance_sets(idx)
    g_other = random_graph(10, 0.3, seed=6)
    with pytest.raises(ValueError):
        load_index(path, expect_graph=g_other)
