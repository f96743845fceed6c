"""Exact time-dependent earliest-arrival search, optionally restricted to marked edges.

Labels are unwrapped arrival times (they may exceed one day); edge functions
are evaluated at ``label % PERIOD``. Under FIFO a label-setting Dijkstra
is exact and waiting at nodes never helps, so none is modelled.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numba import njit

from .network import TdGraph
from .ttf import PERIOD

UNREACHABLE = -1


class EaQuery(NamedTuple):
    """Earliest-arrival query: source, target, departure time (deciseconds)."""

    s: int
    t: int
    tau: int


@dataclass
class EaResult:
    arrival: int
    path: np.ndarray = field(repr=False)
    tau: int = 0

    @property
    def travel_time(self) -> int:
        return self.arrival - self.tau


class Unreachable(LookupError):
    """No path connects the query's source and target (in the searched subgraph)."""


class EdgeMark:
    """Set of edge ids with O(1) reset via a generation stamp."""

    def __init__(self, edge_count: int):
        self.stamp = np.zeros(edge_count, dtype=np.int32)
        self.gen = np.int32(1)

    def clear(self) -> None:
        if self.gen == np.iinfo(np.int32).max:
            self.stamp[:] = 0
            self.gen = np.int32(0)
        self.gen = np.int32(self.gen + 1)

    def mark(self, edges) -> None:
        self.stamp[np.asarray(edges, dtype=np.int64)] = self.gen

    def mark_all(self) -> None:
        self.stamp[:] = self.gen

    def __contains__(self, e) -> bool:
        return bool(self.stamp[e] == self.gen)

    def edges(self) -> np.ndarray:
        return np.flatnonzero(self.stamp == self.gen)

    def __len__(self) -> int:
        return int(np.count_nonzero(self.stamp == self.gen))


class SearchContext:
    """Caller-owned scratch for one search at a time (versioned, never cleared)."""

    def __init__(self, node_count: int):
        self.dist = np.zeros(node_count, dtype=np.int64)
        self.parent = np.full(node_count, -1, dtype=np.int64)
        self.seen = np.zeros(node_count, dtype=np.int64)
        self.version = 0

    def next_version(self) -> int:
        self.version += 1
        return self.version


_NO_MARK = np.zeros(0, dtype=np.int32)


@njit(cache=True, nogil=True)
def _eval(ttf_first, bp_time, bp_travel, e, t):
    lo = ttf_first[e]
    hi = ttf_first[e + 1]
    if hi - lo == 1:
        return bp_travel[lo]
    # first breakpoint with time > t
    a = lo
    b = hi
    while a < b:
        mid = (a + b) >> 1
        if bp_time[mid] <= t:
            a = mid + 1
        else:
            b = mid
    if a == lo:
        t0 = bp_time[hi - 1] - PERIOD
        w0 = bp_travel[hi - 1]
        t1 = bp_time[lo]
        w1 = bp_travel[lo]
    elif a == hi:
        t0 = bp_time[hi - 1]
        w0 = bp_travel[hi - 1]
        t1 = bp_time[lo] + PERIOD
        w1 = bp_travel[lo]
    else:
        t0 = bp_time[a - 1]
        w0 = bp_travel[a - 1]
        t1 = bp_time[a]
        w1 = bp_travel[a]
    return w0 + ((w1 - w0) * (t - t0)) // (t1 - t0)


@njit(cache=True, nogil=True)
def _td_search(first_out, head, ttf_first, bp_time, bp_travel, s, t, tau,
               mark, gen, restricted, dist, parent, seen, version):
    """Label-setting search from s; stops when t is settled (t < 0: settle all)."""
    dist[s] = tau
    parent[s] = -1
    seen[s] = version
    heap = [(tau, s)]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == t:
            return d
        tm = d % PERIOD
        for e in range(first_out[u], first_out[u + 1]):
            if restricted and mark[e] != gen:
                continue
            v = head[e]
            nd = d + _eval(ttf_first, bp_time, bp_travel, e, tm)
            if seen[v] != version or nd < dist[v]:
                seen[v] = version
                dist[v] = nd
                parent[v] = e
                heapq.heappush(heap, (nd, v))
    if t < 0:
        return 0
    return -1


@njit(cache=True, nogil=True)
def _extract_path(parent, tail, s, t):
    n = 0
    v = t
    while v != s:
        n += 1
        v = tail[parent[v]]
    out = np.empty(n, dtype=np.int64)
    v = t
    while v != s:
        n -= 1
        out[n] = parent[v]
        v = tail[parent[v]]
    return out


@njit(cache=True, nogil=True)
def _td_many(first_out, head, ttf_first, bp_time, bp_travel, s, t, taus,
             mark, gen, restricted, dist, parent, seen, version):
    out = np.empty(taus.size, dtype=np.int64)
    for i in range(taus.size):
        version += 1
        out[i] = _td_search(first_out, head, ttf_first, bp_time, bp_travel, s, t, taus[i],
                            mark, gen, restricted, dist, parent, seen, version)
    return out, version


@njit(cache=True, nogil=True)
def _td_one_to_many(first_out, head, ttf_first, bp_time, bp_travel, s, targets, taus,
                    dist, parent, seen, version):
    """Arrival at every target for every departure; -1 marks unreachable."""
    out = np.empty((taus.size, targets.size), dtype=np.int64)
    empty = np.zeros(0, dtype=np.int32)
    for i in range(taus.size):
        version += 1
        _td_search(first_out, head, ttf_first, bp_time, bp_travel, s, -1, taus[i],
                   empty, 0, False, dist, parent, seen, version)
        for j in range(targets.size):
            v = targets[j]
            out[i, j] = dist[v] if seen[v] == version else -1
    return out, version


@njit(cache=True, nogil=True)
def _eval_path(tail, head, ttf_first, bp_time, bp_travel, path, s, tau):
    t = tau
    at = s
    for i in range(path.size):
        e = path[i]
        if tail[e] != at:
            return -1, i
        t += _eval(ttf_first, bp_time, bp_travel, e, t % PERIOD)
        at = head[e]
    return t, -1


def _kernel_args(g: TdGraph):
    return g.first_out, g.head, g.ttf_first, g.bp_time, g.bp_travel


def _check_node(g: TdGraph, v: int, name: str) -> int:
    v = int(v)
    if not 0 <= v < g.node_count:
        raise IndexError(f"{name}={v} is not a node id (n={g.node_count})")
    return v


def _run(g: TdGraph, q: EaQuery, marks: Optional[EdgeMark], ctx: Optional[SearchContext]) -> EaResult:
    s = _check_node(g, q.s, "s")
    t = _check_node(g, q.t, "t")
    tau = int(q.tau)
    if tau < 0:
        raise ValueError("departure time must be non-negative")
    ctx = ctx or g.search_context()
    if s == t:
        return EaResult(tau, np.zeros(0, dtype=np.int64), tau)
    version = ctx.next_version()
    if marks is None:
        stamp, gen, restricted = _NO_MARK, 0, False
    else:
        stamp, gen, restricted = marks.stamp, marks.gen, True
    arrival = _td_search(*_kernel_args(g), s, t, tau, stamp, gen, restricted,
                         ctx.dist, ctx.parent, ctx.seen, version)
    if arrival < 0:
        raise Unreachable(f"{t} is not reachable from {s}")
    return EaResult(int(arrival), _extract_path(ctx.parent, g.tail, s, t), tau)


def td_dijkstra(g: TdGraph, q: EaQuery, ctx: Optional[SearchContext] = None) -> EaResult:
    """Exact earliest arrival at ``q.t``; raises Unreachable."""
    return _run(g, q, None, ctx)


def td_dijkstra_restricted(g: TdGraph, marks: EdgeMark, q: EaQuery,
                           ctx: Optional[SearchContext] = None) -> EaResult:
    """Exact earliest arrival using only edges in ``marks``."""
    return _run(g, q, marks, ctx)


def earliest_arrivals(g: TdGraph, s: int, t: int, taus: Sequence[int],
                      marks: Optional[EdgeMark] = None,
                      ctx: Optional[SearchContext] = None) -> np.ndarray:
    """Batched arrivals at ``t`` for many departures (-1 where unreachable)."""
    s = _check_node(g, s, "s")
    t = _check_node(g, t, "t")
    taus = np.ascontiguousarray(taus, dtype=np.int64)
    if s == t:
        return taus.copy()
    ctx = ctx or g.search_context()
    if marks is None:
        stamp, gen, restricted = _NO_MARK, 0, False
    else:
        stamp, gen, restricted = marks.stamp, marks.gen, True
    out, ctx.version = _td_many(*_kernel_args(g), s, t, taus, stamp, gen, restricted,
                                ctx.dist, ctx.parent, ctx.seen, ctx.version)
    return out


def arrivals_from(g: TdGraph, s: int, targets: Sequence[int], taus: Sequence[int],
                  ctx: Optional[SearchContext] = None) -> np.ndarray:
    """Exact arrival matrix ``[departure, target]`` from one full search per departure."""
    s = _check_node(g, s, "s")
    ctx = ctx or g.search_context()
    out, ctx.version = _td_one_to_many(*_kernel_args(g), s,
                                       np.ascontiguousarray(targets, dtype=np.int64),
                                       np.ascontiguousarray(taus, dtype=np.int64),
                                       ctx.dist, ctx.parent, ctx.seen, ctx.version)
    return out


class PathError(ValueError):
    """The edge sequence is not a contiguous walk."""


def eval_path(g: TdGraph, path: Sequence[int], tau: int, s: Optional[int] = None) -> int:
    """Arrival time after following ``path`` from departure ``tau``."""
    path = np.ascontiguousarray(path, dtype=np.int64)
    if path.size == 0:
        return int(tau)
    if np.any((path < 0) | (path >= g.edge_count)):
        raise PathError("edge id out of range")
    start = int(g.tail[path[0]]) if s is None else int(s)
    arrival, bad = _eval_path(g.tail, g.head, g.ttf_first, g.bp_time, g.bp_travel, path, start, int(tau))
    if bad >= 0:
        raise PathError(f"edge {int(path[bad])} at position {bad} does not continue the walk")
    return int(arrival)
