"""Experimental methodology: query generation, error statistics, benchmark and sweep drivers.

Errors are measured against the exact search. The relative error divides
by the optimal travel time (arrival minus departure); ``s == t`` queries have
relative error 0.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .engine import TdsIndex, mark_edges, query_freeflow, query_tds, query_tds_a, window_weights
from .network import TdGraph, largest_scc
from .tdsearch import EaQuery, Unreachable, arrivals_from, earliest_arrivals, td_dijkstra
from .ttf import DECI, PERIOD, WHOLE_DAY

ALGORITHMS = ("freeflow", "tds", "tds-a")
RECORD_FIELDS = ("query_id", "s", "t", "tau", "algo", "exact", "approx", "abs_err", "rel_err", "time_us")
SUMMARY_FIELDS = ("algo", "queries", "unreachable", "opt_solved_pct", "rel_err_avg", "rel_err_q999",
                  "rel_err_max", "abs_err_avg_s", "time_us_mean", "time_us_median", "speedup")
CSV_SCHEMA = "tdroute-csv/1"
QUASI_ABS = 10 * DECI
QUASI_REL = 0.005


class CorrectnessError(AssertionError):
    """A heuristic beat the exact oracle, which means one of them is broken."""


# ---------------------------------------------------------------- queries


def gen_uniform(g: TdGraph, n: int, seed: int, nodes: Optional[np.ndarray] = None) -> list[EaQuery]:
    """``n`` queries with source, target and departure drawn uniformly.

    Nodes come from ``nodes`` (default: the largest strongly connected
    component), so every query is answerable.
    """
    if n < 0:
        raise ValueError("query count must be non-negative")
    if nodes is None:
        nodes = largest_scc(g)
    rng = np.random.default_rng(seed)
    s = rng.choice(nodes, size=n)
    t = rng.choice(nodes, size=n)
    tau = rng.integers(0, PERIOD, size=n)
    return [EaQuery(int(a), int(b), int(c)) for a, b, c in zip(s, t, tau)]


def dijkstra_rank(position: int) -> int:
    """``ceil(log2(position))`` for a 1-based position in the settle order."""
    if position < 1:
        raise ValueError("positions start at 1")
    return (position - 1).bit_length()


class RankQuery(NamedTuple):
    s: int
    t: int
    tau: int
    rank: int

    @property
    def query(self) -> EaQuery:
        return EaQuery(self.s, self.t, self.tau)


def _day_average_matrix(g: TdGraph):
    w = window_weights(g, WHOLE_DAY).astype(float)
    # parallel edges: keep the cheapest (csr would sum them)
    order = np.lexsort((w, g.head, g.tail))
    t, h, w = g.tail[order], g.head[order], w[order]
    first = np.ones(t.size, dtype=bool)
    first[1:] = (t[1:] != t[:-1]) | (h[1:] != h[:-1])
    return csr_matrix((w[first], (t[first], h[first])), shape=(g.node_count, g.node_count))


def settle_order(dist: np.ndarray) -> np.ndarray:
    """Reachable nodes by increasing distance, ties by node id."""
    reach = np.flatnonzero(np.isfinite(dist))
    return reach[np.lexsort((reach, dist[reach]))]


def gen_rank(g: TdGraph, per_rank: int, seed: int) -> list[RankQuery]:
    """Dijkstra-rank queries on day-averaged weights.

    For each of ``per_rank`` random sources the node at settle position
    ``p = 2**r`` becomes the target of a rank-``r`` query, for every rank the
    source's reachable set allows.
    """
    nodes = largest_scc(g)
    rng = np.random.default_rng(seed)
    mat = _day_average_matrix(g)
    out = []
    for s in rng.choice(nodes, size=per_rank):
        order = settle_order(dijkstra(mat, indices=int(s)))
        r = 1
        while 2 ** r <= order.size:
            out.append(RankQuery(int(s), int(order[2 ** r - 1]), int(rng.integers(0, PERIOD)), r))
            r += 1
    return sorted(out, key=lambda q: q.rank)


# ---------------------------------------------------------------- statistics


def quantile(values: Iterable[float], alpha: float):
    """Smallest ``x`` in ``values`` with at least ``alpha * len(values)`` elements strictly below it.

    When duplicates at the top make that count unreachable, the maximum is
    returned.
    """
    arr = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values))
    if arr.size == 0:
        raise ValueError("quantile of an empty set")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    need = math.ceil(alpha * arr.size)
    if need == 0:
        return arr[0]
    # first element whose strictly-smaller count reaches `need`
    j = int(np.searchsorted(arr, arr[need - 1], side="right"))
    return arr[j] if j < arr.size else arr[-1]


@dataclass
class ErrorRecord:
    query_id: int
    query: EaQuery
    algo: str
    exact: int
    approx: int
    time_us: Optional[float] = None

    @property
    def abs_error(self) -> int:
        return self.approx - self.exact

    @property
    def rel_error(self) -> float:
        travel = self.exact - self.query.tau
        return self.abs_error / travel if travel > 0 else 0.0

    def row(self, timing: bool) -> list:
        return [self.query_id, self.query.s, self.query.t, self.query.tau, self.algo,
                _sec(self.exact), _sec(self.approx), _sec(self.abs_error), format(self.rel_error, ".17g"),
                f"{self.time_us:.1f}" if timing and self.time_us is not None else ""]


def _sec(ds: int) -> str:
    sign = "-" if ds < 0 else ""
    ds = abs(int(ds))
    return f"{sign}{ds // DECI}.{ds % DECI}"


def classify(abs_error: int, rel_error: float) -> str:
    """``optimal``, ``quasi`` (< 10 s absolute or < 0.5 % relative error) or ``outlier``."""
    if abs_error == 0:
        return "optimal"
    if abs_error < QUASI_ABS or rel_error < QUASI_REL:
        return "quasi"
    return "outlier"


@dataclass
class ErrorSummary:
    algo: str
    queries: int
    unreachable: int
    optimally_solved: float
    rel_mean: float
    rel_q999: float
    rel_max: float
    abs_mean_s: float
    time_us_mean: Optional[float] = None
    time_us_median: Optional[float] = None
    speedup: Optional[float] = None

    def row(self) -> list:
        def opt(x, fmt):
            return "" if x is None else format(x, fmt)

        return [self.algo, self.queries, self.unreachable, format(100 * self.optimally_solved, ".3f"),
                format(self.rel_mean, ".6e"), format(self.rel_q999, ".6e"), format(self.rel_max, ".6e"),
                format(self.abs_mean_s, ".3f"), opt(self.time_us_mean, ".2f"), opt(self.time_us_median, ".2f"),
                opt(self.speedup, ".2f")]


def summarize(algo: str, records: Sequence[ErrorRecord], unreachable: int = 0,
              exact_times: Optional[Sequence[float]] = None) -> ErrorSummary:
    if not records:
        return ErrorSummary(algo, 0, unreachable, 0.0, 0.0, 0.0, 0.0, 0.0)
    rel = np.array([r.rel_error for r in records])
    ab = np.array([r.abs_error for r in records])
    times = [r.time_us for r in records if r.time_us is not None]
    s = ErrorSummary(algo, len(records), unreachable, float(np.mean(ab == 0)), float(rel.mean()),
                     float(quantile(rel, 0.999)), float(rel.max()), float(ab.mean()) / DECI)
    if times:
        s.time_us_mean = float(np.mean(times))
        s.time_us_median = float(np.median(times))
        if exact_times:
            s.speedup = float(np.mean(exact_times)) / s.time_us_mean if s.time_us_mean > 0 else None
    return s


# ---------------------------------------------------------------- benchmark


def run_algorithm(idx: TdsIndex, algo: str, q: EaQuery, stretch: float = 1.2, windows=None):
    if algo == "freeflow":
        return query_freeflow(idx, q)
    if algo == "tds":
        return query_tds(idx, q, windows=windows)
    if algo == "tds-a":
        return query_tds_a(idx, q, stretch=stretch, windows=windows)
    if algo == "exact":
        return td_dijkstra(idx.graph, q)
    raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS + ('exact',)}")


@dataclass
class BenchmarkResult:
    records: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)
    unreachable: int = 0
    exact_times_us: list = field(default_factory=list)


def _bench_chunk(idx, chunk, algorithms, stretch, windows, timing):
    records, exact_times, unreachable = [], [], []
    clock = time.perf_counter
    for qid, q in chunk:
        try:
            t0 = clock()
            exact = td_dijkstra(idx.graph, q).arrival
            t1 = clock()
        except Unreachable:
            unreachable.append(qid)
            continue
        if timing:
            exact_times.append((t1 - t0) * 1e6)
        for algo in algorithms:
            t0 = clock()
            approx = run_algorithm(idx, algo, q, stretch, windows).arrival
            t1 = clock()
            rec = ErrorRecord(qid, q, algo, exact, approx, (t1 - t0) * 1e6 if timing else None)
            if rec.abs_error < 0:
                raise CorrectnessError(f"query {qid} {q}: {algo} arrival {approx} beats exact {exact}")
            records.append(rec)
    return records, exact_times, unreachable


def run_benchmark(idx: TdsIndex, queries: Sequence[EaQuery], algorithms: Sequence[str] = ALGORITHMS,
                  stretch: float = 1.2, windows=None, timing: bool = False, workers: int = 1) -> BenchmarkResult:
    """Run exact search plus each algorithm on every query and aggregate the errors.

    Queries whose target is unreachable are skipped and counted. Records
    are ordered by query id regardless of ``workers``.
    """
    for a in algorithms:
        if a not in ALGORITHMS + ("exact",):
            raise ValueError(f"unknown algorithm {a!r}")
    items = list(enumerate(queries))
    workers = max(1, int(workers))
    if workers == 1:
        parts = [_bench_chunk(idx, items, algorithms, stretch, windows, timing)]
    else:
        size = math.ceil(len(items) / workers) or 1
        chunks = [items[i:i + size] for i in range(0, len(items), size)]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _bench_chunk(idx, c, algorithms, stretch, windows, timing), chunks))
    res = BenchmarkResult()
    unreachable = []
    for recs, times, unr in parts:
        res.records.extend(recs)
        res.exact_times_us.extend(times)
        unreachable.extend(unr)
    order = {a: i for i, a in enumerate(algorithms)}
    res.records.sort(key=lambda r: (r.query_id, order[r.algo]))
    res.unreachable = len(unreachable)
    for a in algorithms:
        res.summaries[a] = summarize(a, [r for r in res.records if r.algo == a], res.unreachable,
                                     res.exact_times_us or None)
    return res


def write_records_csv(path, records: Sequence[ErrorRecord], timing: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow(r.row(timing))


def write_summary_csv(path, summaries: Iterable[ErrorSummary]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for s in summaries:
            w.writerow(s.row())


def write_rank_summary_csv(path, rows: Iterable[tuple]) -> None:
    """Rows of ``(rank, ErrorSummary)``; the summary columns gain a leading ``rank``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank",) + SUMMARY_FIELDS)
        for rank, s in rows:
            w.writerow([rank] + s.row())


# ---------------------------------------------------------------- exhaustive sweep


class QueryBudgetExceeded(RuntimeError):
    pass


@dataclass
class ExhaustiveReport:
    nodes: np.ndarray
    departures: np.ndarray
    counts: dict
    outliers: dict  # (s, t) -> list[ErrorRecord], ordered by departure

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def fractions(self) -> dict:
        total = self.total
        return {k: (v / total if total else 0.0) for k, v in self.counts.items()}

    def outlier_records(self) -> list:
        return [r for key in sorted(self.outliers) for r in self.outliers[key]]


def run_exhaustive(idx: TdsIndex, node_stride: int, time_stride: int, algo: str = "tds",
                   stretch: float = 1.2, max_queries: int = 10_000_000,
                   nodes: Optional[np.ndarray] = None) -> ExhaustiveReport:
    """All pairs of every ``node_stride``-th component node at every ``time_stride`` departure.

    Only outliers are kept in full, grouped by ``(s, t)``. Refuses to run
    when the query count exceeds ``max_queries``.
    """
    if node_stride < 1 or time_stride < 1:
        raise ValueError("strides must be >= 1")
    if algo not in ("tds", "tds-a"):
        raise ValueError("exhaustive sweeps support 'tds' and 'tds-a'")
    g = idx.graph
    if nodes is None:
        nodes = largest_scc(g)[::node_stride]
    nodes = np.asarray(nodes, dtype=np.int64)
    taus = np.arange(0, PERIOD, time_stride, dtype=np.int64)
    total = nodes.size * (nodes.size - 1) * taus.size
    if total > max_queries:
        raise QueryBudgetExceeded(f"{total} queries exceed the budget of {max_queries}")
    counts = {"optimal": 0, "quasi": 0, "outlier": 0}
    outliers = {}
    qid = 0
    for s in nodes.tolist():
        exact = arrivals_from(g, s, nodes, taus)
        for j, t in enumerate(nodes.tolist()):
            if t == s:
                continue
            if np.any(exact[:, j] < 0):
                raise Unreachable(f"{t} not reachable from {s}")
            marks, paths = mark_edges(idx, s, t, stretch=stretch if algo == "tds-a" else None)
            approx = earliest_arrivals(g, s, t, taus, marks=marks)
            ab = approx - exact[:, j]
            if np.any(ab < 0) or np.any(approx < 0):
                raise CorrectnessError(f"{algo} inconsistent with exact search for ({s}, {t})")
            rel = ab / (exact[:, j] - taus)
            for i in range(taus.size):
                cls = classify(int(ab[i]), float(rel[i]))
                counts[cls] += 1
                if cls == "outlier":
                    q = EaQuery(s, t, int(taus[i]))
                    outliers.setdefault((s, t), []).append(
                        ErrorRecord(qid + i, q, algo, int(exact[i, j]), int(approx[i])))
            qid += taus.size
    return ExhaustiveReport(nodes, taus, counts, outliers)
