"""``tdroute`` command line: generate, inspect, preprocess, query, profile and benchmark.

Time flags accept seconds (``90``, ``7.5``) or clock times (``7:30``,
``17:05:30``). Human-readable output goes to stdout, CSV to files only.
Exit status: 0 on success, 1 for invalid input or failed checks, 2 for
usage errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path


from . import evaluation as ev
from .engine import (
    DEFAULT_STRETCH,
    build_index,
    count_distinct_paths,
    error_bound,
    query_profile,
)
from .network import GeneratorConfig, generate, load, stats, store
from .tdsearch import EaQuery, Unreachable, eval_path, td_dijkstra
from .ttf import DECI, DEFAULT_WINDOWS, PERIOD, hhmm, seconds
from .validation import check_algorithms, check_rate, check_stretch, check_windows


class UsageError(Exception):
    pass


def parse_time(text: str) -> int:
    """Seconds or a clock time, as deciseconds."""
    try:
        value = hhmm(text) if ":" in text else seconds(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a time: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"negative time: {text!r}")
    return value


def parse_windows(text: str):
    try:
        return check_windows([w for w in text.split(",") if w.strip()])
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def clock(ds: int) -> str:
    day, rest = divmod(int(ds), PERIOD)
    s, tenth = divmod(rest, DECI)
    text = f"{s // 3600}:{s // 60 % 60:02d}:{s % 60:02d}.{tenth}"
    return f"{text} (+{day}d)" if day else text


def duration(ds: int) -> str:
    return f"{ds // DECI}.{ds % DECI} s"


# ---------------------------------------------------------------- subcommands


def cmd_generate(a) -> int:
    cfg = GeneratorConfig(node_count=a.nodes, avg_degree=a.degree, td_fraction=a.td_fraction,
                          breakpoints_per_td_edge=a.breakpoints, seed=a.seed, placement=a.placement)
    cfg.validate()
    g = generate(cfg)
    store(g, a.output)
    print(f"wrote {a.output}")
    print(stats(g))
    return 0


def cmd_stats(a) -> int:
    print(stats(load(a.instance)))
    return 0


def _index(a, g=None):
    g = g if g is not None else load(a.instance)
    return build_index(g, a.windows, cache_dir=a.cache)


def cmd_preprocess(a) -> int:
    g = load(a.instance)
    t0 = time.perf_counter()
    idx = _index(a, g)
    elapsed = time.perf_counter() - t0
    for w, h in zip(idx.windows, idx.window_ch):
        print(f"window {w}: {h.shortcut_count} shortcuts")
    print(f"freeflow: {idx.freeflow_ch.shortcut_count} shortcuts")
    print(f"preprocessing {elapsed:.2f} s")
    if a.cache:
        print(f"hierarchies cached in {a.cache}")
    return 0


def cmd_query(a) -> int:
    g = load(a.instance)
    q = EaQuery(a.s, a.t, a.tau)
    for name, v in (("s", a.s), ("t", a.t)):
        if not 0 <= v < g.node_count:
            raise ValueError(f"--{name} {v} is not a node id (n={g.node_count})")
    idx = None if a.algo == "exact" else _index(a, g)
    r = ev.run_algorithm(idx, a.algo, q, a.stretch) if idx else td_dijkstra(g, q)
    if eval_path(g, r.path, q.tau, s=q.s) != r.arrival:
        raise ev.CorrectnessError("reported arrival does not match its own path")
    print(f"{a.algo}: depart {clock(q.tau)} arrive {clock(r.arrival)} travel {duration(r.arrival - q.tau)}")
    print("path " + (" ".join(map(str, r.path.tolist())) or "(empty)"))
    if getattr(r, "marked", 0):
        print(f"marked edges {r.marked}")
    if a.check:
        exact = td_dijkstra(g, q).arrival
        rec = ev.ErrorRecord(0, q, a.algo, exact, r.arrival)
        print(f"exact arrive {clock(exact)} abs_err {duration(rec.abs_error)} rel_err {rec.rel_error:.6e}")
        if rec.abs_error < 0:
            raise ev.CorrectnessError(f"negative error {rec.abs_error} ds")
    return 0


def cmd_profile(a) -> int:
    idx = _index(a)
    p = query_profile(idx, a.s, a.t, check_rate(a.rate))
    print(f"profile {a.s} -> {a.t}, {p.arrivals.size} samples every {duration(p.rate)}")
    for tau, arr in zip(p.departures.tolist(), p.arrivals.tolist()):
        print(f"  {clock(tau)}  {duration(arr - tau)}")
    b = p.slope_bounds()
    print(f"distinct paths {count_distinct_paths(p)}")
    print(f"slopes max {b.lambda_max:.6f} min {b.lambda_min:.6f}")
    print(f"interpolation error bound {error_bound(p.rate / DECI, b):.3f} s (exact samples assumed)")
    return 0


def _summary_table(summaries) -> None:
    print(f"{'algo':<10}{'queries':>8}{'opt %':>9}{'rel avg':>13}{'rel q99.9':>13}{'rel max':>13}"
          f"{'mean us':>10}{'speedup':>9}")
    for s in summaries:
        mean = "" if s.time_us_mean is None else f"{s.time_us_mean:.1f}"
        sp = "" if s.speedup is None else f"{s.speedup:.2f}"
        print(f"{s.algo:<10}{s.queries:>8}{100 * s.optimally_solved:>9.2f}{s.rel_mean:>13.3e}"
              f"{s.rel_q999:>13.3e}{s.rel_max:>13.3e}{mean:>10}{sp:>9}")


def cmd_bench(a) -> int:
    algos = check_algorithms(a.algo.split(","), ev.ALGORITHMS)
    g = load(a.instance)
    idx = _index(a, g)
    summary_path = a.summary or str(Path(a.output).with_suffix("")) + "_summary.csv"
    if a.rank:
        rq = ev.gen_rank(g, a.rank, a.seed)
        queries = [r.query for r in rq]
    else:
        queries = ev.gen_uniform(g, a.queries, a.seed)
    res = ev.run_benchmark(idx, queries, algos, stretch=a.stretch, timing=a.timing, workers=a.workers)
    ev.write_records_csv(a.output, res.records, timing=a.timing)
    if a.rank:
        rank_of = [r.rank for r in rq]
        rows = []
        for rank in sorted(set(rank_of)):
            for algo in algos:
                recs = [r for r in res.records if r.algo == algo and rank_of[r.query_id] == rank]
                rows.append((rank, ev.summarize(algo, recs)))
        ev.write_rank_summary_csv(summary_path, rows)
        print(f"{len(queries)} rank queries, ranks {min(rank_of)}..{max(rank_of)}")
    else:
        ev.write_summary_csv(summary_path, res.summaries.values())
    _summary_table(res.summaries.values())
    if res.unreachable:
        print(f"unreachable queries skipped: {res.unreachable}")
    print(f"records {a.output}\nsummary {summary_path}")
    return 0


def cmd_exhaustive(a) -> int:
    idx = _index(a)
    rep = ev.run_exhaustive(idx, a.node_stride, a.time_stride, algo=a.algo, stretch=a.stretch,
                            max_queries=a.budget)
    ev.write_records_csv(a.output, rep.outlier_records())
    fr = rep.fractions()
    print(f"{rep.nodes.size} nodes x {rep.departures.size} departures = {rep.total} queries")
    for k in ("optimal", "quasi", "outlier"):
        print(f"{k:<8} {rep.counts[k]:>10} {100 * fr[k]:8.4f}%")
    print(f"outlier pairs {len(rep.outliers)}; outliers written to {a.output}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdroute", description="Time-dependent routing with window-marked subgraphs.")
    sub = p.add_subparsers(dest="command", required=True)

    def instance(sp):
        sp.add_argument("instance", help="instance file (tdgraph v1 format)")

    def index_opts(sp):
        sp.add_argument("--windows", type=parse_windows, default=DEFAULT_WINDOWS,
                        help="comma-separated H:MM-H:MM list (default 0:00-6:00,7:00-9:00,11:00-14:00,17:00-19:00)")
        sp.add_argument("--cache", metavar="DIR", help="reuse or store hierarchies in DIR")

    sp = sub.add_parser("generate", help="write a synthetic instance")
    sp.add_argument("output")
    sp.add_argument("--nodes", type=int, default=1000)
    sp.add_argument("--degree", type=float, default=2.5, help="directed out-edges per node")
    sp.add_argument("--td-fraction", type=float, default=0.05)
    sp.add_argument("--breakpoints", type=int, default=15)
    sp.add_argument("--placement", choices=("important", "uniform"), default="important")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("stats", help="print instance statistics")
    instance(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("preprocess", help="build the window and freeflow hierarchies")
    instance(sp)
    index_opts(sp)
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("query", help="answer one earliest-arrival query")
    instance(sp)
    index_opts(sp)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--tau", type=parse_time, required=True, help="departure (seconds or H:MM)")
    sp.add_argument("--algo", choices=("exact",) + ev.ALGORITHMS, default="tds")
    sp.add_argument("--stretch", type=float, default=DEFAULT_STRETCH)
    sp.add_argument("--check", action="store_true", help="compare against the exact search")
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("profile", help="sampled arrival profile over one day")
    instance(sp)
    index_opts(sp)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--rate", type=parse_time, default=600 * DECI, help="sample spacing (default 600 s)")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("bench", help="uniform or rank benchmark against the exact search")
    instance(sp)
    index_opts(sp)
    sp.add_argument("--algo", default=",".join(ev.ALGORITHMS))
    sp.add_argument("--queries", type=int, default=1000)
    sp.add_argument("--rank", type=int, default=0, metavar="N", help="rank mode: N sources, one query per rank")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stretch", type=float, default=DEFAULT_STRETCH)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--timing", action="store_true", help="record per-query times (breaks byte-identical CSV)")
    sp.add_argument("--output", "-o", default="bench.csv")
    sp.add_argument("--summary")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("exhaustive", help="all strided pairs at all strided departures")
    instance(sp)
    index_opts(sp)
    sp.add_argument("--node-stride", type=int, default=100)
    sp.add_argument("--time-stride", type=parse_time, default=300 * DECI, help="default 300 s")
    sp.add_argument("--algo", choices=("tds", "tds-a"), default="tds")
    sp.add_argument("--stretch", type=float, default=DEFAULT_STRETCH)
    sp.add_argument("--budget", type=int, default=10_000_000, help="maximum number of queries")
    sp.add_argument("--output", "-o", default="outliers.csv")
    sp.set_defaults(func=cmd_exhaustive)
    return p


def _validate(a) -> None:
    if getattr(a, "stretch", None) is not None:
        check_stretch(a.stretch)
    if getattr(a, "queries", 0) < 0:
        raise UsageError("--queries must be non-negative")
    if getattr(a, "workers", 1) < 1:
        raise UsageError("--workers must be at least 1")
    if a.command == "exhaustive" and (a.node_stride < 1 or a.time_stride < 1):
        raise UsageError("strides must be at least 1")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        _validate(a)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tdroute: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"tdroute: error: {exc}", file=sys.stderr)
        return 2
    try:
        return a.func(a)
    except Unreachable as exc:
        print(f"tdroute: unreachable: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, OSError, IndexError, ev.CorrectnessError, ev.QueryBudgetExceeded) as exc:
        print(f"tdroute: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
