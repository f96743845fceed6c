"""Window-marking routing: freeflow baseline, TD-S, TD-S+A and sampled profiles.

Offline, every edge function is averaged over each time window and one
contraction hierarchy is built per window (plus one on freeflow weights
for the baseline). Online, the shortest path of every window is marked and
an exact time-dependent search runs on the marked subgraph only.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ch as chmod
from .network import TdGraph
from .tdsearch import (
    EaQuery,
    EaResult,
    EdgeMark,
    Unreachable,
    earliest_arrivals,
    eval_path,
    td_dijkstra_restricted,
)
from .ttf import DEFAULT_WINDOWS, PERIOD, SlopeBounds, TimeWindow, average_over_window, slope_bounds

DEFAULT_STRETCH = 1.2
DEFAULT_RATE = 6000  # 10 min in deciseconds


def window_weights(g: TdGraph, window: TimeWindow) -> np.ndarray:
    """Per-edge window average rounded to whole deciseconds (never below 1)."""
    weights = g.freeflow_weights().copy()
    for e in np.flatnonzero(g.breakpoint_counts > 1):
        weights[e] = max(1, int(np.floor(average_over_window(g.ttf(int(e)), window) + 0.5)))
    return weights


def scalar_graph(g: TdGraph, weights: np.ndarray) -> chmod.ScalarGraph:
    return chmod.ScalarGraph(g.node_count, g.tail, g.head, weights)


class TdsIndex:
    """One hierarchy per time window plus one on freeflow weights, over the same graph."""

    def __init__(self, graph: TdGraph, windows: Sequence[TimeWindow], window_ch, freeflow_ch,
                 window_weights=None, freeflow_weights=None):
        self.graph = graph
        self.windows = tuple(windows)
        self.window_ch = list(window_ch)
        self.freeflow_ch = freeflow_ch
        self.window_weights = window_weights
        self.freeflow_weights = freeflow_weights
        self._local = threading.local()

    def edge_mark(self) -> EdgeMark:
        mk = getattr(self._local, "mark", None)
        if mk is None:
            mk = self._local.mark = EdgeMark(self.graph.edge_count)
        mk.clear()
        return mk

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_local"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._local = threading.local()


def build_index(g: TdGraph, windows: Sequence[TimeWindow] = DEFAULT_WINDOWS, cache_dir=None) -> TdsIndex:
    """Average per window, then contract each weighting (and the freeflow one) separately."""
    windows = tuple(windows)
    if not windows:
        raise ValueError("at least one time window is required")
    for w in windows:
        if not isinstance(w, TimeWindow):
            raise TypeError(f"expected TimeWindow, got {type(w).__name__}")
    ww = [window_weights(g, w) for w in windows]
    ff = g.freeflow_weights()
    window_ch = [chmod.build(scalar_graph(g, w), cache_dir=cache_dir) for w in ww]
    freeflow_ch = chmod.build(scalar_graph(g, ff), cache_dir=cache_dir)
    return TdsIndex(g, windows, window_ch, freeflow_ch, ww, ff)


@dataclass
class TdsResult(EaResult):
    marked: int = 0
    window_paths: list = field(default_factory=list, repr=False)


def _as_query(q) -> EaQuery:
    return q if isinstance(q, EaQuery) else EaQuery(*q)


def _window_ids(idx: TdsIndex, windows) -> Sequence[int]:
    if windows is None:
        return range(len(idx.windows))
    ids = list(windows)
    for i in ids:
        if not 0 <= i < len(idx.windows):
            raise IndexError(f"window {i} not in index (has {len(idx.windows)})")
    return ids


def mark_edges(idx: TdsIndex, s: int, t: int, windows=None, stretch: Optional[float] = None,
               add_freeflow: bool = False, timings: Optional[dict] = None):
    """Mark the per-window shortest paths (or alternatives when ``stretch`` is set).

    Returns ``(marks, window_paths)``; a window whose query is unreachable
    contributes ``None`` and nothing to the marks. ``timings``, when given,
    switches to the separated mode (all distance queries, then all
    unpacking) and accumulates seconds under ``ch_dist`` and ``ch_path``;
    alternative enumeration is timed as a whole under ``ch_alt``.
    """
    marks = idx.edge_mark()
    hierarchies = [idx.window_ch[i] for i in _window_ids(idx, windows)]
    if add_freeflow:
        hierarchies.append(idx.freeflow_ch)
    paths = []
    if timings is not None and stretch is None:
        t0 = time.perf_counter()
        for h in hierarchies:
            h.distance(s, t)
        t1 = time.perf_counter()
        for h in hierarchies:
            paths.append(h.unpack_last())
        t2 = time.perf_counter()
        timings["ch_dist"] = timings.get("ch_dist", 0.0) + (t1 - t0)
        timings["ch_path"] = timings.get("ch_path", 0.0) + (t2 - t1)
    else:
        t0 = time.perf_counter()
        for h in hierarchies:
            if stretch is None:
                p = h.query(s, t)
                paths.append(None if p is None else p.edges)
            else:
                paths.append(h.alternatives(s, t, stretch))
        if timings is not None:
            timings["ch_alt"] = timings.get("ch_alt", 0.0) + (time.perf_counter() - t0)
    for p in paths:
        if p is not None:
            marks.mark(p)
    return marks, paths


def _restricted(idx: TdsIndex, q: EaQuery, marks: EdgeMark, paths, timings) -> TdsResult:
    if q.s != q.t and all(p is None for p in paths):
        raise Unreachable(f"{q.t} is not reachable from {q.s} in any window")
    t0 = time.perf_counter()
    r = td_dijkstra_restricted(idx.graph, marks, q)
    if timings is not None:
        timings["td_search"] = timings.get("td_search", 0.0) + (time.perf_counter() - t0)
    found = [p for p in paths if p is not None]
    marked = int(np.unique(np.concatenate(found)).size) if found else 0
    return TdsResult(r.arrival, r.path, r.tau, marked=marked, window_paths=paths)


def query_freeflow(idx: TdsIndex, q) -> EaResult:
    """Shortest path on freeflow weights, evaluated time-dependently."""
    q = _as_query(q)
    p = idx.freeflow_ch.query(q.s, q.t)
    if p is None:
        raise Unreachable(f"{q.t} is not reachable from {q.s}")
    return EaResult(eval_path(idx.graph, p.edges, q.tau, s=q.s), p.edges, int(q.tau))


def query_tds(idx: TdsIndex, q, windows=None, add_freeflow: bool = False,
              timings: Optional[dict] = None) -> TdsResult:
    """TD-S: exact time-dependent search restricted to the union of window paths.

    ``windows`` selects a subset of the index's windows by position;
    ``add_freeflow`` also marks the freeflow path (off by default).
    """
    q = _as_query(q)
    marks, paths = mark_edges(idx, q.s, q.t, windows, None, add_freeflow, timings)
    return _restricted(idx, q, marks, paths, timings)


def query_tds_a(idx: TdsIndex, q, stretch: float = DEFAULT_STRETCH, windows=None,
                add_freeflow: bool = False, timings: Optional[dict] = None) -> TdsResult:
    """TD-S+A: as TD-S but every window marks all via-paths within ``stretch``."""
    q = _as_query(q)
    marks, paths = mark_edges(idx, q.s, q.t, windows, stretch, add_freeflow, timings)
    return _restricted(idx, q, marks, paths, timings)


# ---------------------------------------------------------------- profiles


@dataclass
class Profile:
    """Arrival times sampled at departures ``0, rate, 2*rate, ...`` over one day."""

    s: int
    t: int
    rate: int
    arrivals: np.ndarray
    paths: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.rate <= 0 or PERIOD % self.rate:
            raise ValueError("sample rate must divide the period")
        self.arrivals = np.asarray(self.arrivals, dtype=np.int64)
        if self.arrivals.size != PERIOD // self.rate:
            raise ValueError("one arrival per sample is required")

    @property
    def departures(self) -> np.ndarray:
        return np.arange(self.arrivals.size, dtype=np.int64) * self.rate

    @property
    def travel_times(self) -> np.ndarray:
        return self.arrivals - self.departures

    def slope_bounds(self) -> SlopeBounds:
        return slope_bounds((self.departures, self.travel_times))

    def __call__(self, tau) -> float:
        return interpolate(self, tau)


def _check_rate(rate: int) -> int:
    rate = int(rate)
    if rate <= 0 or PERIOD % rate:
        raise ValueError(f"sample rate {rate} must be a positive divisor of {PERIOD}")
    return rate


def query_profile(idx: TdsIndex, s: int, t: int, rate: int = DEFAULT_RATE, windows=None,
                  with_paths: bool = True) -> Profile:
    """TD-S+P: mark once, then one restricted search per sampled departure."""
    rate = _check_rate(rate)
    marks, paths = mark_edges(idx, s, t, windows)
    if s != t and all(p is None for p in paths):
        raise Unreachable(f"{t} is not reachable from {s} in any window")
    taus = np.arange(PERIOD // rate, dtype=np.int64) * rate
    if not with_paths:
        arr = earliest_arrivals(idx.graph, s, t, taus, marks=marks)
        if np.any(arr < 0):
            raise Unreachable(f"{t} is not reachable from {s} in the marked subgraph")
        return Profile(s, t, rate, arr)
    arrivals, sample_paths = [], []
    for tau in taus.tolist():
        r = td_dijkstra_restricted(idx.graph, marks, EaQuery(s, t, tau))
        arrivals.append(r.arrival)
        sample_paths.append(r.path)
    return Profile(s, t, rate, np.array(arrivals, dtype=np.int64), sample_paths)


def interpolate(p: Profile, tau) -> float:
    """Linear interpolation between the two neighbouring samples (wrapping at midnight).

    Computed as ``((rate - off) * a_i + off * a_next) / rate`` with an exact
    integer numerator, so the result is the correctly rounded value.
    """
    tau_i = int(tau)
    if tau_i != tau:
        raise ValueError("departure must be a whole number of deciseconds")
    day, within = divmod(tau_i, PERIOD)
    i, off = divmod(within, p.rate)
    a = int(p.arrivals[i])
    if i + 1 < p.arrivals.size:
        b = int(p.arrivals[i + 1])
    else:
        b = int(p.arrivals[0]) + PERIOD
    return ((p.rate - off) * a + off * b) / p.rate + day * PERIOD


def error_bound(rate: float, bounds: SlopeBounds) -> float:
    """Worst-case interpolation error ``rate * (lambda_max + lambda_min) / 4``.

    Valid when the samples themselves are exact. Same unit as ``rate``.
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return (rate * bounds.lambda_max + rate * bounds.lambda_min) / 4


def count_distinct_paths(p: Profile) -> int:
    """Number of distinct edge sequences among the sampled paths."""
    if not p.paths:
        raise ValueError("profile was computed without paths")
    return len({tuple(np.asarray(path).tolist()) for path in p.paths})


def exact_profile(g: TdGraph, s: int, t: int, rate: int) -> Profile:
    """Profile sampled with the exact search (no marking); arrivals only."""
    rate = _check_rate(rate)
    taus = np.arange(PERIOD // rate, dtype=np.int64) * rate
    arr = earliest_arrivals(g, s, t, taus)
    if np.any(arr < 0):
        raise Unreachable(f"{t} is not reachable from {s}")
    return Profile(s, t, rate, arr)
