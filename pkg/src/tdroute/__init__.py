"""Time-dependent earliest-arrival routing on road networks.

Times and durations are integer deciseconds; one day is ``PERIOD``.
"""

from .ch import ChIndex, ScalarGraph
from .ch import build as build_ch
from .engine import (
    Profile,
    TdsIndex,
    build_index,
    count_distinct_paths,
    error_bound,
    interpolate,
    query_freeflow,
    query_profile,
    query_tds,
    query_tds_a,
)
from .estimators import ExactRouter, FreeflowRouter, TdsRouter
from .network import GeneratorConfig, TdGraph, generate, load, stats, store
from .tdsearch import EaQuery, EaResult, Unreachable, eval_path, td_dijkstra, td_dijkstra_restricted
from .ttf import DECI, DEFAULT_WINDOWS, PERIOD, TimeWindow, TravelTimeFunction, evaluate, slope_bounds

__version__ = "0.1.0"

__all__ = [
    "ChIndex", "DECI", "DEFAULT_WINDOWS", "EaQuery", "EaResult", "ExactRouter", "FreeflowRouter",
    "GeneratorConfig", "PERIOD", "Profile", "ScalarGraph", "TdGraph", "TdsIndex", "TdsRouter",
    "TimeWindow", "TravelTimeFunction", "Unreachable", "build_ch", "build_index",
    "count_distinct_paths", "error_bound", "eval_path", "evaluate", "generate", "interpolate", "load",
    "query_freeflow", "query_profile", "query_tds", "query_tds_a", "slope_bounds", "stats", "store",
    "td_dijkstra", "td_dijkstra_restricted",
]
