"""Periodic piecewise-linear travel-time functions.

All times and durations are integer deciseconds. One period is one day,
``PERIOD = 864000``. Evaluation rounds the interpolated travel time down to
a whole decisecond; with integer departure times this keeps ``t + f(t)``
non-decreasing whenever every segment slope is at least -1, so FIFO holds
exactly and no tolerance is needed anywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

DECI = 10
PERIOD = 86400 * DECI


def seconds(value: float) -> int:
    """Convert seconds to integer deciseconds (rounded to nearest)."""
    return int(round(value * DECI))


def hhmm(text: str) -> int:
    """Parse ``H:MM`` or ``H:MM:SS`` into deciseconds since midnight."""
    parts = [int(p) for p in text.split(":")]
    if len(parts) == 2:
        parts.append(0)
    if len(parts) != 3:
        raise ValueError(f"not a clock time: {text!r}")
    h, m, s = parts
    return ((h * 60 + m) * 60 + s) * DECI


class FifoError(ValueError):
    """A travel-time function has a segment with slope below -1."""

    def __init__(self, segment: int, slope: float):
        super().__init__(f"FIFO violated on segment {segment} (slope {slope:.4f} < -1)")
        self.segment = segment
        self.slope = slope


class TravelTimeFunction:
    """Periodic piecewise-linear map from entry time to travel time.

    ``times`` are strictly increasing breakpoints in ``[0, PERIOD)`` and
    ``travels`` the positive travel time at each. A single breakpoint is a
    constant function. The segment after the last breakpoint wraps to the
    first one shifted by one period.
    """

    __slots__ = ("times", "travels")

    def __init__(self, times: Sequence[int], travels: Sequence[int], check: bool = True):
        t = np.array(times, dtype=np.int64)
        w = np.array(travels, dtype=np.int64)
        if t.ndim != 1 or t.shape != w.shape or t.size == 0:
            raise ValueError("times and travels must be equal-length, non-empty 1-d sequences")
        if check:
            if t[0] < 0 or t[-1] >= PERIOD:
                raise ValueError("breakpoint times must lie in [0, PERIOD)")
            if np.any(np.diff(t) <= 0):
                raise ValueError("breakpoint times must be strictly increasing")
            if np.any(w <= 0):
                raise ValueError("travel times must be strictly positive")
            bad = validate_fifo((t, w))
            if bad is not None:
                raise FifoError(bad, _segment_slopes(t, w)[bad])
        t.setflags(write=False)
        w.setflags(write=False)
        self.times = t
        self.travels = w

    @classmethod
    def constant(cls, travel: int) -> "TravelTimeFunction":
        return cls([0], [travel])

    @classmethod
    def from_points(cls, points: Iterable[tuple[int, int]]) -> "TravelTimeFunction":
        pts = list(points)
        return cls([p[0] for p in pts], [p[1] for p in pts])

    @property
    def is_constant(self) -> bool:
        return self.times.size == 1

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TravelTimeFunction):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.travels, other.travels)

    def __hash__(self) -> int:
        return hash((self.times.tobytes(), self.travels.tobytes()))

    def __repr__(self) -> str:
        pts = ", ".join(f"({a}, {b})" for a, b in zip(self.times.tolist(), self.travels.tolist()))
        return f"TravelTimeFunction([{pts}])"

    def __call__(self, t: int) -> int:
        return evaluate(self, t)


def _segment_slopes(times: np.ndarray, travels: np.ndarray) -> np.ndarray:
    if times.size == 1:
        return np.zeros(1)
    t_next = np.append(times[1:], times[0] + PERIOD)
    w_next = np.append(travels[1:], travels[0])
    return (w_next - travels) / (t_next - times)


def _as_arrays(f) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(f, TravelTimeFunction):
        return f.times, f.travels
    times, travels = f
    return np.asarray(times, dtype=np.int64), np.asarray(travels, dtype=np.int64)


def evaluate(f: TravelTimeFunction, t: int) -> int:
    """Travel time for entering at ``t`` (any integer, taken modulo the period)."""
    times, travels = f.times, f.travels
    k = times.size
    if k == 1:
        return int(travels[0])
    t = int(t) % PERIOD
    i = int(np.searchsorted(times, t, side="right")) - 1
    if i < 0:
        t0, w0 = int(times[-1]) - PERIOD, int(travels[-1])
        t1, w1 = int(times[0]), int(travels[0])
    elif i == k - 1:
        t0, w0 = int(times[-1]), int(travels[-1])
        t1, w1 = int(times[0]) + PERIOD, int(travels[0])
    else:
        t0, w0 = int(times[i]), int(travels[i])
        t1, w1 = int(times[i + 1]), int(travels[i + 1])
    return w0 + ((w1 - w0) * (t - t0)) // (t1 - t0)


def validate_fifo(f) -> int | None:
    """Return the index of the first segment with slope < -1, or None.

    Accepts a TravelTimeFunction or a ``(times, travels)`` pair so raw input can be
    checked before construction. Segment ``i`` runs from breakpoint ``i`` to
    ``i + 1``; the last one is the wrap-around segment. The comparison is
    done on integers, ``w1 - w0 >= -(t1 - t0)``.
    """
    times, travels = _as_arrays(f)
    if times.size <= 1:
        return None
    t_next = np.append(times[1:], times[0] + PERIOD)
    w_next = np.append(travels[1:], travels[0])
    bad = np.flatnonzero(w_next - travels < -(t_next - times))
    return int(bad[0]) if bad.size else None


def freeflow(f: TravelTimeFunction) -> int:
    """Minimum travel time over the day; a PL minimum sits on a breakpoint."""
    return int(f.travels.min())


@dataclass(frozen=True)
class TimeWindow:
    """Half-open daily interval ``[begin, end)`` in deciseconds; never wraps midnight."""

    begin: int
    end: int

    def __post_init__(self):
        if not (0 <= self.begin < self.end <= PERIOD):
            raise ValueError(f"invalid time window [{self.begin}, {self.end})")

    @classmethod
    def parse(cls, text: str) -> "TimeWindow":
        """Parse ``"7:00-9:00"``; ``24:00`` is accepted as the end of day."""
        try:
            a, b = text.split("-")
        except ValueError:
            raise ValueError(f"time window must look like 7:00-9:00, got {text!r}") from None
        return cls(hhmm(a.strip()), hhmm(b.strip()))

    def __str__(self) -> str:
        def fmt(x):
            s = x // DECI
            return f"{s // 3600}:{s // 60 % 60:02d}"

        return f"{fmt(self.begin)}-{fmt(self.end)}"


DEFAULT_WINDOWS = (
    TimeWindow(0, hhmm("6:00")),
    TimeWindow(hhmm("7:00"), hhmm("9:00")),
    TimeWindow(hhmm("11:00"), hhmm("14:00")),
    TimeWindow(hhmm("17:00"), hhmm("19:00")),
)
WHOLE_DAY = TimeWindow(0, PERIOD)


def average_over_window(f: TravelTimeFunction, window: TimeWindow) -> float:
    """Exact time-average of the (unrounded) function over ``window``.

    Integrates the trapezoids of the linear pieces clipped to the window.
    """
    times, travels = f.times, f.travels
    if times.size == 1:
        return float(travels[0])
    ext_t = np.concatenate(([times[-1] - PERIOD], times, [times[0] + PERIOD])).astype(float)
    ext_w = np.concatenate(([travels[-1]], travels, [travels[0]])).astype(float)
    inner = ext_t[(ext_t > window.begin) & (ext_t < window.end)]
    xs = np.concatenate(([window.begin], inner, [window.end]))
    ys = np.interp(xs, ext_t, ext_w)
    area = np.sum((ys[1:] + ys[:-1]) * np.diff(xs)) / 2.0
    return float(area / (window.end - window.begin))


@dataclass(frozen=True)
class SlopeBounds:
    """Largest rising slope and (absolute) steepest falling slope, both >= 0."""

    lambda_max: float
    lambda_min: float

    def __post_init__(self):
        if self.lambda_max < 0 or self.lambda_min < 0:
            raise ValueError("slope bounds must be non-negative")


def slope_bounds(f: Union[TravelTimeFunction, tuple]) -> SlopeBounds:
    """Slope extremes of a periodic PL function, wrap segment included.

    Takes a TravelTimeFunction or a ``(times, values)`` pair over one period,
    e.g. the travel-time curve of a sampled profile.
    """
    times, travels = _as_arrays(f)
    if times.size <= 1:
        return SlopeBounds(0.0, 0.0)
    slopes = _segment_slopes(times, travels)
    return SlopeBounds(max(0.0, float(slopes.max())), max(0.0, -float(slopes.min())))
