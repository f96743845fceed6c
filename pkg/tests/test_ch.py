import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdroute.ch import ChIndex, ScalarGraph, build
from tdroute.engine import scalar_graph, window_weights
from tdroute.ttf import DEFAULT_WINDOWS

from .oracles import scipy_all_pairs, textbook_dijkstra


def path_graph():
    return ScalarGraph(3, [0, 1], [1, 2], [5, 7])


def walk_ok(g, path, s, t):
    at = s
    for e in path:
        if g.tail[e] != at:
            return False
        at = g.head[e]
    return at == t


def random_graph(rng, n, density=3):
    m = int(rng.integers(n, density * n + 1))
    tail = rng.integers(0, n, m)
    head = rng.integers(0, n, m)
    keep = tail != head
    return ScalarGraph(n, tail[keep], head[keep], rng.integers(1, 1000, int(keep.sum())))


def test_path_graph_query():
    ch = build(path_graph())
    p = ch.query(0, 2)
    assert p.distance == 12
    assert p.edges.tolist() == [0, 1]
    assert ch.query(2, 0) is None


def test_same_node_query_is_empty():
    p = build(path_graph()).query(1, 1)
    assert p.distance == 0 and p.edges.size == 0


def test_isolated_node_is_unreachable():
    g = ScalarGraph(4, [0, 1], [1, 2], [3, 4])
    ch = build(g)
    assert ch.query(0, 3) is None and ch.query(3, 0) is None
    assert ch.alternatives(0, 3) is None


def test_parallel_edges_keep_the_cheaper():
    ch = build(ScalarGraph(2, [0, 0], [1, 1], [9, 4]))
    assert ch.query(0, 1).edges.tolist() == [1]


@pytest.mark.parametrize("seed", range(8))
def test_all_pairs_match_textbook_dijkstra(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 200)
    ch = build(g)
    edges = list(zip(g.tail.tolist(), g.head.tolist(), g.weight.tolist()))
    table = ch.distance_table(range(200), range(200))
    for s in range(0, 200, 7):
        ref = textbook_dijkstra(200, edges, s)
        assert table[s].tolist() == [-1 if d is None else d for d in ref]
    assert np.array_equal(table, scipy_all_pairs(200, g.tail, g.head, g.weight))


def test_paths_unpack_to_walks_with_matching_weight():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 150)
    ch = build(g)
    for s, t in rng.integers(0, 150, (300, 2)).tolist():
        p = ch.query(s, t)
        if p is None:
            continue
        assert walk_ok(g, p.edges, s, t)
        assert int(g.weight[p.edges].sum()) == p.distance


def test_upward_and_downward_respect_rank():
    rng = np.random.default_rng(5)
    ch = build(random_graph(rng, 120))
    up_tail = np.repeat(np.arange(120), np.diff(ch.up_first))
    assert np.all(ch.rank[up_tail] < ch.rank[ch.up_head])
    dn_owner = np.repeat(np.arange(120), np.diff(ch.dn_first))
    assert np.all(ch.rank[ch.dn_head] > ch.rank[dn_owner])
    assert sorted(ch.rank.tolist()) == list(range(120))


def test_shortcuts_unpack_to_their_weight():
    rng = np.random.default_rng(6)
    g = random_graph(rng, 100)
    ch = build(g)
    for e in np.flatnonzero(ch.ch_orig < 0)[:200]:
        stack, total = [int(e)], 0
        while stack:
            x = stack.pop()
            if ch.ch_orig[x] >= 0:
                total += int(g.weight[ch.ch_orig[x]])
            else:
                assert ch.ch_tail[ch.ch_c1[x]] == ch.ch_tail[x]
                assert ch.ch_head[ch.ch_c1[x]] == ch.ch_mid[x] == ch.ch_tail[ch.ch_c2[x]]
                stack += [int(ch.ch_c1[x]), int(ch.ch_c2[x])]
        assert total == ch.ch_w[e]


def test_build_is_deterministic():
    rng = np.random.default_rng(8)
    g = random_graph(rng, 150)
    a, b = build(g), build(g)
    for f in ChIndex._FIELDS:
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_generated_instance_queries_match_dijkstra(small_graph):
    g = scalar_graph(small_graph, window_weights(small_graph, DEFAULT_WINDOWS[1]))
    ch = build(g)
    ref = scipy_all_pairs(g.node_count, g.tail, g.head, g.weight)
    rng = np.random.default_rng(0)
    for s, t in rng.integers(0, g.node_count, (500, 2)).tolist():
        p = ch.query(s, t)
        assert p.distance == ref[s, t]


def test_unique_path_alternatives_equal_query():
    ch = build(path_graph())
    assert ch.alternatives(0, 2, 1.5).tolist() == ch.query(0, 2).edges.tolist()


def two_routes(second=11):
    # 0 -> 1 -> 3 weighs 10, 0 -> 2 -> 3 weighs `second`
    return ScalarGraph(4, [0, 1, 0, 2], [1, 3, 2, 3], [5, 5, 5, second - 5])


def test_two_disjoint_paths_within_stretch():
    ch = build(two_routes(11))
    assert ch.alternatives(0, 3, 1.2).tolist() == [0, 1, 2, 3]
    assert sorted(ch.query(0, 3).edges.tolist()) == [0, 1]


def test_path_outside_stretch_is_left_out():
    ch = build(two_routes(13))
    assert ch.alternatives(0, 3, 1.2).tolist() == [0, 1]
    assert ch.alternatives(0, 3, 1.3).tolist() == [0, 1, 2, 3]


def test_stretch_below_one_rejected():
    with pytest.raises(ValueError):
        build(path_graph()).alternatives(0, 2, 0.9)


def test_alternatives_superset_of_shortest_path(small_graph):
    g = scalar_graph(small_graph, window_weights(small_graph, DEFAULT_WINDOWS[3]))
    ch = build(g)
    rng = np.random.default_rng(1)
    grew = 0
    for s, t in rng.integers(0, g.node_count, (1000, 2)).tolist():
        alt = ch.alternatives(s, t, 1.2)
        sp = ch.query(s, t).edges
        assert np.all(np.isin(sp, alt))
        grew += alt.size > sp.size
    assert grew > 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 1.5), st.floats(0.0, 0.5))
def test_alternatives_monotone_in_stretch(seed, a, extra):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 60)
    ch = build(g)
    for s, t in rng.integers(0, 60, (10, 2)).tolist():
        lo, hi = ch.alternatives(s, t, a), ch.alternatives(s, t, a + extra)
        if lo is None:
            assert hi is None
            continue
        assert np.all(np.isin(lo, hi))


def test_separated_distance_and_unpack_match_query():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 100)
    ch = build(g)
    for s, t in rng.integers(0, 100, (100, 2)).tolist():
        p = ch.query(s, t)
        d = ch.distance(s, t)
        path = ch.unpack_last()
        if p is None:
            assert d is None and path is None
        else:
            assert d == p.distance and path.tolist() == p.edges.tolist()


def test_cache_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    g = random_graph(rng, 80)
    a = build(g, cache_dir=tmp_path)
    files = list(tmp_path.glob("ch-*.npz"))
    assert len(files) == 1
    b = build(g, cache_dir=tmp_path)
    for f in ChIndex._FIELDS:
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert ChIndex.load(files[0], expected_key="other") is None


def test_scalar_graph_validation():
    with pytest.raises(ValueError):
        ScalarGraph(2, [0], [1], [0])
    with pytest.raises(ValueError):
        ScalarGraph(2, [0], [2], [1])
    with pytest.raises(ValueError):
        ScalarGraph(2, [0, 1], [1], [1])
