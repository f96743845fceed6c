import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdroute.ttf import (
    DEFAULT_WINDOWS,
    PERIOD,
    FifoError,
    SlopeBounds,
    TimeWindow,
    TravelTimeFunction,
    average_over_window,
    evaluate,
    freeflow,
    hhmm,
    seconds,
    slope_bounds,
    validate_fifo,
)

from .oracles import dense_eval, ref_eval
from .strategies import make_fifo, ttfs

S = 10  # deciseconds per second
RAMP = TravelTimeFunction([0, 43200 * S], [100 * S, 200 * S])


def points(f):
    return list(zip(f.times.tolist(), f.travels.tolist()))


@pytest.mark.parametrize("t", [0, 1, 12345, PERIOD - 1, 3 * PERIOD + 7])
def test_constant_evaluates_to_its_value(t):
    assert evaluate(TravelTimeFunction.constant(100 * S), t) == 100 * S


def test_midpoint_of_rising_segment():
    assert evaluate(RAMP, 21600 * S) == 150 * S


def test_midpoint_of_wrap_segment():
    assert evaluate(RAMP, 64800 * S) == 150 * S


def test_breakpoints_evaluate_exactly():
    f = TravelTimeFunction([10, 500, 9000], [40, 77, 60])
    assert [f(10), f(500), f(9000)] == [40, 77, 60]


def test_fifo_ok_for_constant():
    assert validate_fifo(TravelTimeFunction.constant(5)) is None


def test_fifo_violation_reports_segment_and_slope():
    times, travels = [0, 3600 * S], [7200 * S, 60 * S]
    assert validate_fifo((times, travels)) == 0
    with pytest.raises(FifoError) as exc:
        TravelTimeFunction(times, travels)
    assert exc.value.segment == 0
    assert exc.value.slope == pytest.approx(-1.983, abs=1e-3)


def test_fifo_slope_exactly_minus_one_accepted():
    assert validate_fifo(([0, 100], [200, 100])) is None
    assert validate_fifo(([0, 100], [200, 99])) == 0


def test_wrap_segment_is_checked():
    # last point falls steeply back to the first across midnight
    assert validate_fifo(([0, PERIOD - 10], [10, 500])) == 1


@pytest.mark.parametrize(
    "times, travels",
    [([5, 5], [1, 1]), ([7, 3], [1, 1]), ([0], [0]), ([PERIOD], [3]), ([-1], [3]), ([], [])],
)
def test_malformed_functions_rejected(times, travels):
    with pytest.raises(ValueError):
        TravelTimeFunction(times, travels)


def test_freeflow_examples():
    assert freeflow(TravelTimeFunction.constant(100 * S)) == 100 * S
    assert freeflow(RAMP) == 100 * S


def test_average_examples():
    assert average_over_window(TravelTimeFunction.constant(100 * S), DEFAULT_WINDOWS[1]) == 100 * S
    assert average_over_window(RAMP, TimeWindow(0, 43200 * S)) == pytest.approx(150 * S, abs=1e-9)


def test_slope_bound_examples():
    assert slope_bounds(TravelTimeFunction.constant(7)) == SlopeBounds(0.0, 0.0)
    b = slope_bounds(RAMP)
    assert b.lambda_max == pytest.approx(100 / 43200, rel=1e-12)
    assert b.lambda_min == pytest.approx(100 / 43200, rel=1e-12)


def test_reference_slope_values_accepted():
    b = SlopeBounds(0.19, 0.15)
    assert (b.lambda_max, b.lambda_min) == (0.19, 0.15)
    with pytest.raises(ValueError):
        SlopeBounds(-0.1, 0.0)


def test_default_windows():
    assert [str(w) for w in DEFAULT_WINDOWS] == ["0:00-6:00", "7:00-9:00", "11:00-14:00", "17:00-19:00"]


def test_window_parsing_and_rejections():
    assert TimeWindow.parse("7:00-9:30") == TimeWindow(hhmm("7:00"), hhmm("9:30"))
    assert TimeWindow.parse("18:00-24:00").end == PERIOD
    for bad in ("22:00-2:00", "9:00-9:00", "7:00", "x-y"):
        with pytest.raises(ValueError):
            TimeWindow.parse(bad)


def test_unit_helpers():
    assert seconds(1.25) == 12 and hhmm("1:02:03") == 37230


@settings(max_examples=200, deadline=None)
@given(ttfs(), st.integers(0, 3 * PERIOD))
def test_eval_matches_rational_reference(f, t):
    assert evaluate(f, t) == ref_eval(points(f), t)


@settings(max_examples=100, deadline=None)
@given(ttfs(), st.integers(0, PERIOD - 1), st.integers(1, 5))
def test_periodicity(f, t, k):
    assert evaluate(f, t) == evaluate(f, t + k * PERIOD)


@settings(max_examples=60, deadline=None)
@given(ttfs())
def test_fifo_closure_dense(f):
    ts = np.arange(0, PERIOD, 7)
    exits = ts + dense_eval(points(f), ts)
    assert np.all(np.diff(exits) >= 0)


@settings(max_examples=60, deadline=None)
@given(ttfs())
def test_freeflow_is_a_lower_bound_and_attained(f):
    vals = dense_eval(points(f), np.arange(PERIOD))
    assert freeflow(f) == vals.min()


@settings(max_examples=60, deadline=None)
@given(ttfs(), st.integers(0, PERIOD - 1), st.integers(1, 3000))
def test_continuity(f, t, eps):
    b = slope_bounds(f)
    step = max(b.lambda_max, b.lambda_min)
    # floor rounding contributes at most one unit
    assert abs(evaluate(f, t) - evaluate(f, t + eps)) <= step * eps + 1


@settings(max_examples=60, deadline=None)
@given(ttfs(max_points=8), st.integers(0, 86399), st.integers(1, 86400))
def test_average_matches_one_second_riemann_sum(f, a, length):
    # breakpoints snapped onto the 1 s grid: the trapezoid sum is then exact
    times = sorted(set((f.times // S * S).tolist()))
    travels = make_fifo(times, f.travels[: len(times)].tolist())
    g = TravelTimeFunction(times, travels)
    b = a
    e = min(86400, a + length)
    if e <= b:
        return
    w = TimeWindow(b * S, e * S)
    grid = np.arange(b, e + 1) * S
    et = np.concatenate(([times[-1] - PERIOD], times, [times[0] + PERIOD]))
    ew = np.concatenate(([travels[-1]], travels, [travels[0]]))
    vals = np.interp(grid, et, ew)
    riemann = np.sum((vals[1:] + vals[:-1]) / 2) / (e - b)
    avg = average_over_window(g, w)
    assert abs(avg - riemann) <= 0.5 * S
    assert vals.min() - 1e-9 <= avg <= vals.max() + 1e-9
