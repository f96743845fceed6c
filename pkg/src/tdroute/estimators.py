"""Scikit-learn style wrappers: ``fit`` runs preprocessing, ``predict`` answers queries.

``predict`` takes an ``(n, 3)`` array of ``(s, t, tau)`` rows and returns
arrival times in deciseconds, with -1 for unreachable targets.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .engine import (
    DEFAULT_STRETCH,
    TdsIndex,
    build_index,
    query_freeflow,
    query_profile,
    query_tds,
    query_tds_a,
)
from .network import TdGraph
from .tdsearch import UNREACHABLE, EaQuery, Unreachable, td_dijkstra
from .ttf import DEFAULT_WINDOWS
from .validation import check_graph, check_queries, check_rate, check_stretch, check_windows


class _Router(BaseEstimator):
    def _query(self, q: EaQuery):
        raise NotImplementedError

    def _node_count(self) -> int:
        return self.graph_.node_count

    def route(self, s: int, t: int, tau: int):
        """Full result (arrival and edge path) for a single query; raises Unreachable."""
        check_is_fitted(self)
        q = check_queries([[s, t, tau]], self._node_count())[0]
        return self._query(EaQuery(int(q[0]), int(q[1]), int(q[2])))

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self)
        q = check_queries(X, self._node_count())
        out = np.empty(len(q), dtype=np.int64)
        for i, (s, t, tau) in enumerate(q.tolist()):
            try:
                out[i] = self._query(EaQuery(s, t, tau)).arrival
            except Unreachable:
                out[i] = UNREACHABLE
        return out


class ExactRouter(_Router):
    """Exact time-dependent search; no preprocessing."""

    def fit(self, graph: TdGraph, y=None):
        self.graph_ = check_graph(graph)
        return self

    def _query(self, q):
        return td_dijkstra(self.graph_, q)


class _IndexedRouter(_Router):
    def _fit_index(self, data):
        if isinstance(data, TdsIndex):
            if tuple(data.windows) != check_windows(self.windows):
                raise ValueError("prebuilt index uses different time windows")
            self.index_ = data
        else:
            self.index_ = build_index(check_graph(data), check_windows(self.windows),
                                      cache_dir=getattr(self, "cache_dir", None))
        self.graph_ = self.index_.graph
        return self


class FreeflowRouter(_IndexedRouter):
    """Shortest path on uncongested weights, evaluated at the actual departure time."""

    def __init__(self, windows=DEFAULT_WINDOWS, cache_dir=None):
        self.windows = windows
        self.cache_dir = cache_dir

    def fit(self, data, y=None):
        return self._fit_index(data)

    def _query(self, q):
        return query_freeflow(self.index_, q)


class TdsRouter(_IndexedRouter):
    """Time-dependent search on the edges of per-window shortest paths.

    Parameters
    ----------
    windows : sequence of TimeWindow or "H:MM-H:MM" strings
    alternatives : mark every via-path within ``stretch`` instead of the shortest path only
    stretch : length bound for alternatives, relative to the window's shortest path
    mark_freeflow : also mark the freeflow shortest path
    cache_dir : directory for cached hierarchies
    """

    def __init__(self, windows=DEFAULT_WINDOWS, alternatives=False, stretch=DEFAULT_STRETCH,
                 mark_freeflow=False, cache_dir=None):
        self.windows = windows
        self.alternatives = alternatives
        self.stretch = stretch
        self.mark_freeflow = mark_freeflow
        self.cache_dir = cache_dir

    def fit(self, data, y=None):
        check_stretch(self.stretch)
        return self._fit_index(data)

    def _query(self, q):
        if self.alternatives:
            return query_tds_a(self.index_, q, stretch=check_stretch(self.stretch),
                               add_freeflow=self.mark_freeflow)
        return query_tds(self.index_, q, add_freeflow=self.mark_freeflow)

    def profile(self, s: int, t: int, rate: int):
        """Arrival samples every ``rate`` deciseconds over one day."""
        check_is_fitted(self)
        check_queries([[s, t, 0]], self._node_count())
        return query_profile(self.index_, int(s), int(t), check_rate(rate))
