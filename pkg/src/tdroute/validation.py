"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .network import TdGraph
from .ttf import PERIOD, TimeWindow


def check_graph(g) -> TdGraph:
    if not isinstance(g, TdGraph):
        raise TypeError(f"expected a TdGraph, got {type(g).__name__}")
    if g.node_count == 0:
        raise ValueError("graph has no nodes")
    return g


def check_queries(queries, node_count: int) -> np.ndarray:
    """Coerce to an ``(n, 3)`` int64 array of ``(s, t, tau)`` rows and range-check it."""
    q = np.asarray(queries)
    if q.ndim == 1 and q.size == 3:
        q = q.reshape(1, 3)
    if q.ndim != 2 or q.shape[1] != 3:
        raise ValueError(f"queries must have shape (n, 3), got {q.shape}")
    if q.size and not np.issubdtype(q.dtype, np.integer):
        if not np.all(np.equal(np.mod(q, 1), 0)):
            raise ValueError("queries must hold whole numbers")
    q = q.astype(np.int64)
    if q.size:
        if q[:, :2].min() < 0 or q[:, :2].max() >= node_count:
            raise ValueError(f"node ids must lie in [0, {node_count})")
        if q[:, 2].min() < 0:
            raise ValueError("departure times must be non-negative")
    return q


def check_windows(windows) -> tuple:
    """Accept TimeWindow objects or ``"H:MM-H:MM"`` strings; reject empty or duplicate lists."""
    if isinstance(windows, (str, TimeWindow)):
        windows = [windows]
    out = []
    for w in windows:
        out.append(TimeWindow.parse(w) if isinstance(w, str) else w)
        if not isinstance(out[-1], TimeWindow):
            raise TypeError(f"not a time window: {w!r}")
    if not out:
        raise ValueError("at least one time window is required")
    if len(set(out)) != len(out):
        raise ValueError("duplicate time windows")
    return tuple(out)


def check_rate(rate) -> int:
    r = int(rate)
    if r != rate or r <= 0 or PERIOD % r:
        raise ValueError(f"sample rate {rate!r} must be a positive divisor of {PERIOD}")
    return r


def check_stretch(stretch) -> float:
    s = float(stretch)
    if not np.isfinite(s) or s < 1.0:
        raise ValueError(f"stretch must be a finite number >= 1, got {stretch!r}")
    return s


def check_algorithms(names: Sequence[str], allowed: Sequence[str]) -> tuple:
    names = tuple(n.strip() for n in names if n.strip())
    if not names:
        raise ValueError("no algorithm selected")
    bad = [n for n in names if n not in allowed]
    if bad:
        raise ValueError(f"unknown algorithm(s) {', '.join(bad)}; choose from {', '.join(allowed)}")
    if len(set(names)) != len(names):
        raise ValueError("algorithm listed twice")
    return names
