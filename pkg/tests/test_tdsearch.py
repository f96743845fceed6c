import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdroute.network import TdGraph
from tdroute.tdsearch import (
    EaQuery,
    EdgeMark,
    PathError,
    Unreachable,
    arrivals_from,
    earliest_arrivals,
    eval_path,
    td_dijkstra,
    td_dijkstra_restricted,
)
from tdroute.ttf import PERIOD, TravelTimeFunction

from .oracles import brute_arrival, chain, graph_points
from .strategies import ttfs

C = TravelTimeFunction.constant


def test_single_constant_edge():
    g = TdGraph.from_edges(2, [(0, 1, C(1000))])
    r = td_dijkstra(g, EaQuery(0, 1, 0))
    assert r.arrival == 1000 and r.path.tolist() == [0]


def test_same_node():
    g = TdGraph.from_edges(2, [(0, 1, C(1000))])
    r = td_dijkstra(g, EaQuery(1, 1, 777))
    assert r.arrival == 777 and r.path.size == 0


def test_unreachable():
    g = TdGraph.from_edges(2, [(0, 1, C(1000))])
    with pytest.raises(Unreachable):
        td_dijkstra(g, EaQuery(1, 0, 0))


def test_bad_ids_rejected():
    g = TdGraph.from_edges(2, [(0, 1, C(1000))])
    with pytest.raises(IndexError):
        td_dijkstra(g, EaQuery(0, 2, 0))
    with pytest.raises(ValueError):
        td_dijkstra(g, EaQuery(0, 1, -5))


def test_diamond_matches_path_enumeration(diamond):
    pts = graph_points(diamond)
    for tau in np.linspace(0, PERIOD - 1, 64).astype(int).tolist():
        r = td_dijkstra(diamond, EaQuery(0, 3, tau))
        assert r.arrival == brute_arrival(diamond, 0, 3, tau, pts)
        assert chain(diamond, pts, r.path.tolist(), tau) == r.arrival


def test_diamond_switches_route_in_the_peak(diamond):
    # bottom route (edges 1, 3) wins around 8:00, top route (0, 2) otherwise
    assert td_dijkstra(diamond, EaQuery(0, 3, 288000)).path.tolist() == [1, 3]
    assert td_dijkstra(diamond, EaQuery(0, 3, 100000)).path.tolist() == [0, 2]


def test_midnight_crossings_are_unwrapped():
    ramp = TravelTimeFunction([0, PERIOD // 2], [1000, 5000])
    g = TdGraph.from_edges(3, [(0, 1, C(PERIOD + 300)), (1, 2, ramp)])
    r = td_dijkstra(g, EaQuery(0, 2, PERIOD - 100))
    entry = PERIOD - 100 + PERIOD + 300
    assert r.arrival == entry + ramp(entry % PERIOD)
    assert r.arrival > 2 * PERIOD


@st.composite
def small_instances(draw):
    n = draw(st.integers(2, 7))
    m = draw(st.integers(1, 14))
    edges = []
    for _ in range(m):
        a = draw(st.integers(0, n - 1))
        b = draw(st.integers(0, n - 2))
        b = b + 1 if b >= a else b
        edges.append((a, b, draw(ttfs(max_points=5, max_travel=60000))))
    return TdGraph.from_edges(n, edges)


@settings(max_examples=80, deadline=None)
@given(small_instances(), st.integers(0, PERIOD - 1))
def test_matches_brute_force(g, tau):
    pts = graph_points(g)
    for s in range(g.node_count):
        for t in range(g.node_count):
            ref = brute_arrival(g, s, t, tau, pts)
            if ref is None:
                with pytest.raises(Unreachable):
                    td_dijkstra(g, EaQuery(s, t, tau))
            else:
                r = td_dijkstra(g, EaQuery(s, t, tau))
                assert r.arrival == ref
                assert eval_path(g, r.path, tau, s=s) == ref


def test_full_marks_equal_unrestricted(small_graph):
    marks = EdgeMark(small_graph.edge_count)
    marks.mark_all()
    rng = np.random.default_rng(0)
    for s, t, tau in zip(*rng.integers(0, small_graph.node_count, (2, 1000)), rng.integers(0, PERIOD, 1000)):
        q = EaQuery(int(s), int(t), int(tau))
        a, b = td_dijkstra(small_graph, q), td_dijkstra_restricted(small_graph, marks, q)
        assert a.arrival == b.arrival and a.path.tolist() == b.path.tolist()


def test_single_path_marks_give_path_evaluation(small_graph):
    rng = np.random.default_rng(1)
    marks = EdgeMark(small_graph.edge_count)
    for _ in range(50):
        s, t = rng.integers(0, small_graph.node_count, 2).tolist()
        path = td_dijkstra(small_graph, EaQuery(s, t, 0)).path
        marks.clear()
        marks.mark(path)
        tau = int(rng.integers(0, PERIOD))
        r = td_dijkstra_restricted(small_graph, marks, EaQuery(s, t, tau))
        assert r.arrival == eval_path(small_graph, path, tau, s=s)


def test_empty_marks_unreachable(small_graph):
    marks = EdgeMark(small_graph.edge_count)
    with pytest.raises(Unreachable):
        td_dijkstra_restricted(small_graph, marks, EaQuery(0, 1, 0))


def test_restriction_dominance(small_graph):
    rng = np.random.default_rng(2)
    marks = EdgeMark(small_graph.edge_count)
    for _ in range(200):
        marks.clear()
        marks.mark(np.flatnonzero(rng.random(small_graph.edge_count) < 0.8))
        s, t, tau = int(rng.integers(0, 400)), int(rng.integers(0, 400)), int(rng.integers(0, PERIOD))
        exact = td_dijkstra(small_graph, EaQuery(s, t, tau)).arrival
        try:
            assert td_dijkstra_restricted(small_graph, marks, EaQuery(s, t, tau)).arrival >= exact
        except Unreachable:
            pass


def test_arrival_monotone_in_departure(small_graph):
    taus = np.arange(0, PERIOD, 997)
    arr = earliest_arrivals(small_graph, 3, 250, taus)
    assert np.all(np.diff(arr) >= 0)


def test_batched_searches_match_single(small_graph):
    taus = np.arange(0, PERIOD, 30011)
    targets = np.array([0, 17, 250, 399])
    table = arrivals_from(small_graph, 5, targets, taus)
    for i, tau in enumerate(taus.tolist()):
        for j, t in enumerate(targets.tolist()):
            assert table[i, j] == td_dijkstra(small_graph, EaQuery(5, t, tau)).arrival
    assert np.array_equal(table[:, 2], earliest_arrivals(small_graph, 5, 250, taus))


def test_eval_path_examples():
    g = TdGraph.from_edges(3, [(0, 1, C(1000)), (1, 2, C(2000))])
    assert eval_path(g, [], 55) == 55
    assert eval_path(g, [0, 1], 0) == 3000
    with pytest.raises(PathError):
        eval_path(g, [1, 0], 0)
    with pytest.raises(PathError):
        eval_path(g, [0, 1], 0, s=1)
    with pytest.raises(PathError):
        eval_path(g, [7], 0)


def test_eval_path_matches_manual_fold(small_graph):
    pts = graph_points(small_graph)
    rng = np.random.default_rng(3)
    for _ in range(100):
        # random walk of up to 30 edges
        v, path = int(rng.integers(0, 400)), []
        for _ in range(int(rng.integers(1, 30))):
            out = list(small_graph.out_edges(v))
            e = out[int(rng.integers(0, len(out)))]
            path.append(e)
            v = int(small_graph.head[e])
        tau = int(rng.integers(0, PERIOD))
        assert eval_path(small_graph, path, tau) == chain(small_graph, pts, path, tau)


def test_edge_mark_generations():
    m = EdgeMark(5)
    m.mark([1, 3])
    assert 1 in m and 2 not in m and len(m) == 2
    m.clear()
    assert len(m) == 0 and m.edges().size == 0
    m.mark_all()
    assert m.edges().tolist() == [0, 1, 2, 3, 4]
