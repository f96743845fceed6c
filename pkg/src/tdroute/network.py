"""Time-dependent road graphs: model, text instance format, and a synthetic generator."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree

from .ttf import PERIOD, TravelTimeFunction, validate_fifo

FORMAT_MAGIC = "tdgraph"
FORMAT_VERSION = "v1"


class InstanceFormatError(ValueError):
    """Malformed instance file; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvalidEdgeError(ValueError):
    """An edge violates the graph invariants (self-loop, bad id, FIFO...)."""

    def __init__(self, edge: int, message: str):
        super().__init__(f"edge {edge}: {message}")
        self.edge = edge


class TdGraph:
    """Directed graph whose edges carry periodic travel-time functions.

    Edges are stored grouped by tail (stable order), so edge ``e`` leaves
    ``tail[e]`` and the out-edges of ``v`` are ``first_out[v]:first_out[v+1]``.
    Breakpoints of all functions are concatenated; edge ``e`` owns
    ``bp_time[ttf_first[e]:ttf_first[e+1]]``.
    """

    def __init__(self, node_count, tail, head, ttf_first, bp_time, bp_travel, validate=True):
        self.node_count = int(node_count)
        self.tail = np.ascontiguousarray(tail, dtype=np.int64)
        self.head = np.ascontiguousarray(head, dtype=np.int64)
        self.ttf_first = np.ascontiguousarray(ttf_first, dtype=np.int64)
        self.bp_time = np.ascontiguousarray(bp_time, dtype=np.int64)
        self.bp_travel = np.ascontiguousarray(bp_travel, dtype=np.int64)
        if validate:
            self._validate()
        self.first_out = np.searchsorted(self.tail, np.arange(self.node_count + 1)).astype(np.int64)
        for arr in (self.tail, self.head, self.ttf_first, self.bp_time, self.bp_travel, self.first_out):
            arr.setflags(write=False)
        self._local = threading.local()

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int, TravelTimeFunction]]) -> "TdGraph":
        """Build from ``(tail, head, ttf)`` triples; edges are stably sorted by tail."""
        edges = list(edges)
        order = sorted(range(len(edges)), key=lambda i: edges[i][0])
        tail = np.array([edges[i][0] for i in order], dtype=np.int64)
        head = np.array([edges[i][1] for i in order], dtype=np.int64)
        sizes = np.array([len(edges[i][2]) for i in order], dtype=np.int64)
        ttf_first = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
        if edges:
            bp_time = np.concatenate([edges[i][2].times for i in order])
            bp_travel = np.concatenate([edges[i][2].travels for i in order])
        else:
            bp_time = bp_travel = np.zeros(0, dtype=np.int64)
        return cls(node_count, tail, head, ttf_first, bp_time, bp_travel)

    def _validate(self):
        n, m = self.node_count, self.tail.size
        if n < 0:
            raise ValueError("node count must be non-negative")
        if self.head.size != m or self.ttf_first.size != m + 1:
            raise ValueError("edge arrays have inconsistent lengths")
        if m and np.any(np.diff(self.tail) < 0):
            raise ValueError("edges must be grouped by tail in ascending order")
        for name, arr in (("tail", self.tail), ("head", self.head)):
            bad = np.flatnonzero((arr < 0) | (arr >= n))
            if bad.size:
                raise InvalidEdgeError(int(bad[0]), f"{name} out of range")
        loops = np.flatnonzero(self.tail == self.head)
        if loops.size:
            raise InvalidEdgeError(int(loops[0]), "self-loop")
        if self.ttf_first[0] != 0 or self.ttf_first[-1] != self.bp_time.size or self.bp_travel.size != self.bp_time.size:
            raise ValueError("breakpoint arrays have inconsistent lengths")
        sizes = np.diff(self.ttf_first)
        bad = np.flatnonzero(sizes < 1)
        if bad.size:
            raise InvalidEdgeError(int(bad[0]), "travel-time function without breakpoints")
        bad = np.flatnonzero(self.bp_travel <= 0)
        if bad.size:
            raise InvalidEdgeError(self._edge_of_bp(bad[0]), "non-positive travel time")
        bad = np.flatnonzero((self.bp_time < 0) | (self.bp_time >= PERIOD))
        if bad.size:
            raise InvalidEdgeError(self._edge_of_bp(bad[0]), "breakpoint time outside [0, PERIOD)")
        if self.bp_time.size:
            # within-edge increments; cross-edge boundaries are masked out
            inc = np.diff(self.bp_time)
            boundary = np.zeros(self.bp_time.size - 1, dtype=bool)
            starts = self.ttf_first[1:-1]
            boundary[starts[(starts > 0) & (starts < self.bp_time.size)] - 1] = True
            bad = np.flatnonzero((inc <= 0) & ~boundary)
            if bad.size:
                raise InvalidEdgeError(self._edge_of_bp(bad[0]), "breakpoint times not strictly increasing")
        for e in np.flatnonzero(sizes > 1):
            lo, hi = self.ttf_first[e], self.ttf_first[e + 1]
            seg = validate_fifo((self.bp_time[lo:hi], self.bp_travel[lo:hi]))
            if seg is not None:
                raise InvalidEdgeError(int(e), f"FIFO violated on segment {seg}")

    def _edge_of_bp(self, i) -> int:
        return int(np.searchsorted(self.ttf_first, i, side="right") - 1)

    @property
    def edge_count(self) -> int:
        return int(self.tail.size)

    def ttf(self, e: int) -> TravelTimeFunction:
        lo, hi = self.ttf_first[e], self.ttf_first[e + 1]
        return TravelTimeFunction(self.bp_time[lo:hi], self.bp_travel[lo:hi], check=False)

    def edges(self):
        for e in range(self.edge_count):
            yield int(self.tail[e]), int(self.head[e]), self.ttf(e)

    def out_edges(self, v: int) -> range:
        return range(int(self.first_out[v]), int(self.first_out[v + 1]))

    @property
    def breakpoint_counts(self) -> np.ndarray:
        return np.diff(self.ttf_first)

    def freeflow_weights(self) -> np.ndarray:
        """Per-edge minimum travel time."""
        if self.edge_count == 0:
            return np.zeros(0, dtype=np.int64)
        return np.minimum.reduceat(self.bp_travel, self.ttf_first[:-1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TdGraph):
            return NotImplemented
        return self.node_count == other.node_count and all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("tail", "head", "ttf_first", "bp_time", "bp_travel")
        )

    def __repr__(self) -> str:
        return f"TdGraph(n={self.node_count}, m={self.edge_count})"

    def search_context(self):
        """Per-thread scratch space for searches on this graph."""
        ctx = getattr(self._local, "ctx", None)
        if ctx is None:
            from .tdsearch import SearchContext

            ctx = self._local.ctx = SearchContext(self.node_count)
        return ctx

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_local"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._local = threading.local()


# ---------------------------------------------------------------- file format


def store(g: TdGraph, path) -> None:
    """Write ``g`` in the line-oriented ``tdgraph v1`` format (byte-deterministic)."""
    lines = [f"{FORMAT_MAGIC} {FORMAT_VERSION} {g.node_count} {g.edge_count}\n"]
    times, travels, first = g.bp_time.tolist(), g.bp_travel.tolist(), g.ttf_first.tolist()
    tails, heads = g.tail.tolist(), g.head.tolist()
    for e in range(g.edge_count):
        lo, hi = first[e], first[e + 1]
        pts = " ".join(f"{times[i]} {travels[i]}" for i in range(lo, hi))
        lines.append(f"{tails[e]} {heads[e]} {hi - lo} {pts}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def load(path) -> TdGraph:
    """Parse and validate an instance file; raises InstanceFormatError / InvalidEdgeError."""
    header = None
    tails, heads, sizes, points = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if header is None:
                if len(fields) != 4 or fields[0] != FORMAT_MAGIC:
                    raise InstanceFormatError(lineno, f"expected header '{FORMAT_MAGIC} {FORMAT_VERSION} <n> <m>'")
                if fields[1] != FORMAT_VERSION:
                    raise InstanceFormatError(lineno, f"unsupported format version {fields[1]!r}")
                try:
                    header = (int(fields[2]), int(fields[3]))
                except ValueError:
                    raise InstanceFormatError(lineno, "node and edge counts must be integers") from None
                if header[0] < 0 or header[1] < 0:
                    raise InstanceFormatError(lineno, "negative counts")
                continue
            try:
                nums = [int(x) for x in fields]
            except ValueError:
                raise InstanceFormatError(lineno, "non-integer field") from None
            if len(nums) < 5:
                raise InstanceFormatError(lineno, "edge line needs tail, head, k and at least one point")
            k = nums[2]
            if k < 1 or len(nums) != 3 + 2 * k:
                raise InstanceFormatError(lineno, f"breakpoint count {k} does not match {len(nums) - 3} values")
            tails.append(nums[0])
            heads.append(nums[1])
            sizes.append(k)
            points.extend(nums[3:])
    if header is None:
        raise InstanceFormatError(1, "missing header")
    n, m = header
    if len(tails) != m:
        raise InstanceFormatError(lineno if tails else 1, f"header announces {m} edges, found {len(tails)}")
    pts = np.array(points, dtype=np.int64).reshape(-1, 2)
    tail = np.array(tails, dtype=np.int64)
    head = np.array(heads, dtype=np.int64)
    sizes_arr = np.array(sizes, dtype=np.int64)
    first = np.concatenate(([0], np.cumsum(sizes_arr))).astype(np.int64)
    bp_time, bp_travel = pts[:, 0].copy(), pts[:, 1].copy()
    if m and np.any(np.diff(tail) < 0):
        order = np.argsort(tail, kind="stable")
        idx = np.concatenate([np.arange(first[e], first[e + 1]) for e in order]) if m else np.zeros(0, np.int64)
        tail, head, sizes_arr = tail[order], head[order], sizes_arr[order]
        first = np.concatenate(([0], np.cumsum(sizes_arr))).astype(np.int64)
        bp_time, bp_travel = bp_time[idx], bp_travel[idx]
    return TdGraph(n, tail, head, first, bp_time, bp_travel)


# ---------------------------------------------------------------- statistics


@dataclass(frozen=True)
class InstanceStats:
    node_count: int
    edge_count: int
    td_edge_fraction: float
    avg_breakpoints_per_td_edge: float

    def __str__(self) -> str:
        return (
            f"nodes {self.node_count}\nedges {self.edge_count}\n"
            f"td edges {100 * self.td_edge_fraction:.2f}%\n"
            f"breakpoints per td edge {self.avg_breakpoints_per_td_edge:.2f}"
        )


def stats(g: TdGraph) -> InstanceStats:
    counts = g.breakpoint_counts
    td = counts[counts >= 2]
    m = g.edge_count
    return InstanceStats(
        node_count=g.node_count,
        edge_count=m,
        td_edge_fraction=float(td.size / m) if m else 0.0,
        avg_breakpoints_per_td_edge=float(td.mean()) if td.size else 0.0,
    )


def largest_scc(g: TdGraph) -> np.ndarray:
    """Sorted node ids of the largest strongly connected component."""
    if g.node_count == 0:
        return np.zeros(0, dtype=np.int64)
    adj = coo_matrix((np.ones(g.edge_count), (g.tail, g.head)), shape=(g.node_count, g.node_count)).tocsr()
    _, labels = connected_components(adj, directed=True, connection="strong")
    biggest = np.bincount(labels).argmax()
    return np.flatnonzero(labels == biggest).astype(np.int64)


# ---------------------------------------------------------------- generator

LOCAL, ARTERIAL, MOTORWAY = 0, 1, 2
_SPEED_KMH = {LOCAL: (30.0, 50.0), ARTERIAL: (60.0, 80.0), MOTORWAY: (100.0, 130.0)}
_TD_WEIGHT = {LOCAL: 1.0, ARTERIAL: 6.0, MOTORWAY: 30.0}


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of a synthetic instance.

    ``avg_degree`` counts directed out-edges per node. ``placement`` is
    ``"important"`` (time-dependency biased toward fast edges) or
    ``"uniform"``. ``speed_step_kmh`` rounds speeds to multiples of that
    step when set.
    """

    node_count: int = 1000
    avg_degree: float = 2.5
    td_fraction: float = 0.05
    breakpoints_per_td_edge: int = 15
    rush_hour_peaks: int = 2
    seed: int = 0
    placement: str = "important"
    shortcut_fraction: float = 0.02
    arterial_spacing: int = 8
    cell_meters: float = 250.0
    congestion: float = 1.5
    speed_step_kmh: Optional[float] = None

    def validate(self):
        if self.node_count < 2:
            raise ValueError("node_count must be at least 2")
        if not 0.0 <= self.td_fraction <= 1.0:
            raise ValueError("td_fraction must lie in [0, 1]")
        if self.avg_degree < 2.0 * (self.node_count - 1) / self.node_count:
            raise ValueError("avg_degree too small to keep the graph connected")
        if self.breakpoints_per_td_edge < 2:
            raise ValueError("breakpoints_per_td_edge must be at least 2")
        if self.rush_hour_peaks not in (0, 1, 2, 3):
            raise ValueError("rush_hour_peaks must be 0..3")
        if self.placement not in ("important", "uniform"):
            raise ValueError("placement must be 'important' or 'uniform'")
        if self.shortcut_fraction < 0 or self.arterial_spacing < 1 or self.cell_meters <= 0:
            raise ValueError("invalid layout parameters")
        if self.congestion < 0:
            raise ValueError("congestion must be non-negative")
        if self.speed_step_kmh is not None and self.speed_step_kmh <= 0:
            raise ValueError("speed_step_kmh must be positive")


# (center hour, jitter hours, width hours, relative amplitude)
_PEAKS = [(8.0, 0.75, 0.9, 1.0), (17.5, 0.75, 1.1, 0.9), (12.5, 0.5, 0.8, 0.4)]


def _make_ttf(rng, freeflow_ds: int, cfg: GeneratorConfig) -> TravelTimeFunction:
    k = cfg.breakpoints_per_td_edge
    slot = PERIOD // k
    times = np.arange(k, dtype=np.int64) * slot + rng.integers(0, max(1, slot // 2), size=k)
    factor = np.ones(k)
    strength = cfg.congestion * rng.uniform(0.4, 1.0)
    hours = times / (3600.0 * 10)
    for center, jitter, width, amp in _PEAKS[: cfg.rush_hour_peaks]:
        c = center + rng.uniform(-jitter, jitter)
        d = np.abs(hours - c)
        d = np.minimum(d, 24.0 - d)
        factor += strength * amp * np.exp(-0.5 * (d / width) ** 2)
    travels = np.maximum(1, np.rint(freeflow_ds * factor)).astype(np.int64)
    travels[int(np.argmin(factor))] = freeflow_ds
    _clamp_fifo(times, travels)
    return TravelTimeFunction(times, travels)


def _clamp_fifo(times: np.ndarray, travels: np.ndarray) -> None:
    # raise points until every segment (wrap included) has slope >= -1
    k = times.size
    changed = True
    while changed:
        changed = False
        for i in range(k):
            j = (i + 1) % k
            dt = times[j] - times[i] if j else times[0] + PERIOD - times[i]
            if travels[j] < travels[i] - dt:
                travels[j] = travels[i] - dt
                changed = True


def _grid_candidates(w: int, n: int):
    idx = np.arange(n)
    r, c = idx // w, idx % w
    pairs = []
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        rr, cc = r + dr, c + dc
        ok = (cc >= 0) & (cc < w)
        other = rr * w + cc
        ok &= other < n
        pairs.append(np.stack([idx[ok], other[ok]], axis=1))
    return np.concatenate(pairs)


def generate(cfg: GeneratorConfig) -> TdGraph:
    """Synthetic road-like instance, deterministic per ``cfg.seed``.

    A jittered grid is thinned to a random spanning tree plus extra
    neighbour and diagonal links, every ``arterial_spacing``-th row and
    column is kept whole as a faster arterial, and random long two-way
    motorway links are added on top. Every link is two-way, so the graph is
    strongly connected. A ``td_fraction`` share of the directed edges gets a
    rush-hour travel-time function.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.node_count
    w = int(math.ceil(math.sqrt(n)))
    idx = np.arange(n)
    xy = np.stack([idx % w, idx // w], axis=1).astype(float)
    xy += rng.uniform(-0.3, 0.3, size=xy.shape)

    cand = _grid_candidates(w, n)
    rows = idx // w
    cols = idx % w
    a, b = cand[:, 0], cand[:, 1]
    horiz = rows[a] == rows[b]
    vert = cols[a] == cols[b]
    arterial = (horiz & (rows[a] % cfg.arterial_spacing == 0)) | (vert & (cols[a] % cfg.arterial_spacing == 0))

    rand_w = rng.uniform(1.0, 2.0, size=len(cand))
    rand_w[arterial] = 0.5
    tree = minimum_spanning_tree(coo_matrix((rand_w, (a, b)), shape=(n, n))).tocoo()
    keep = set(zip(np.minimum(tree.row, tree.col).tolist(), np.maximum(tree.row, tree.col).tolist()))
    for i in np.flatnonzero(arterial):
        keep.add((int(min(a[i], b[i])), int(max(a[i], b[i]))))

    n_short = int(round(cfg.shortcut_fraction * n)) if n >= 16 else 0
    target = int(round(cfg.avg_degree * n / 2.0))
    rest = [i for i in rng.permutation(len(cand)) if (int(min(a[i], b[i])), int(max(a[i], b[i]))) not in keep]
    extra = max(0, target - len(keep) - n_short)
    for i in rest[:extra]:
        keep.add((int(min(a[i], b[i])), int(max(a[i], b[i]))))
    art_set = {(int(min(a[i], b[i])), int(max(a[i], b[i]))) for i in np.flatnonzero(arterial)}

    links = []  # (u, v, class, length cells)
    for u, v in sorted(keep):
        cls = ARTERIAL if (u, v) in art_set else LOCAL
        links.append((u, v, cls, float(np.hypot(*(xy[u] - xy[v])))))
    seen = set(keep)
    tries = 0
    made = 0
    while made < n_short and tries < 50 * n_short + 100:
        tries += 1
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        key = (min(u, v), max(u, v))
        dist = float(np.hypot(*(xy[u] - xy[v])))
        if u == v or key in seen or not 3.0 <= dist <= 12.0:
            continue
        seen.add(key)
        links.append((key[0], key[1], MOTORWAY, dist * 1.1))
        made += 1

    tails, heads, classes, free = [], [], [], []
    for u, v, cls, length in links:
        lo, hi = _SPEED_KMH[cls]
        for x, y in ((u, v), (v, u)):
            speed = rng.uniform(lo, hi)
            if cfg.speed_step_kmh:
                speed = max(cfg.speed_step_kmh, cfg.speed_step_kmh * round(speed / cfg.speed_step_kmh))
            meters = max(length, 0.05) * cfg.cell_meters
            tails.append(x)
            heads.append(y)
            classes.append(cls)
            free.append(max(1, int(round(meters / (speed / 3.6) * 10))))
    m = len(tails)
    n_td = int(round(cfg.td_fraction * m))
    if cfg.placement == "important":
        p = np.array([_TD_WEIGHT[c] for c in classes], dtype=float)
    else:
        p = np.ones(m)
    td_edges = set(rng.choice(m, size=n_td, replace=False, p=p / p.sum()).tolist()) if n_td else set()
    edges = []
    for e in range(m):
        if e in td_edges:
            f = _make_ttf(rng, free[e], cfg)
        else:
            f = TravelTimeFunction.constant(free[e])
        edges.append((tails[e], heads[e], f))
    return TdGraph.from_edges(n, edges)
