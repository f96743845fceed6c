"""Hypothesis strategies for travel-time functions."""

from hypothesis import strategies as st

from tdroute.ttf import PERIOD, TravelTimeFunction


def make_fifo(times, travels):
    """Raise values until every segment (wrap included) has slope >= -1."""
    w = list(travels)
    k = len(times)
    changed = True
    while changed and k > 1:
        changed = False
        for i in range(k):
            j = (i + 1) % k
            dt = times[j] - times[i] if j else times[0] + PERIOD - times[i]
            if w[j] < w[i] - dt:
                w[j] = w[i] - dt
                changed = True
    return w


@st.composite
def ttfs(draw, max_points=12, max_travel=20000):
    k = draw(st.integers(1, max_points))
    times = sorted(draw(st.sets(st.integers(0, PERIOD - 1), min_size=k, max_size=k)))
    travels = draw(st.lists(st.integers(1, max_travel), min_size=k, max_size=k))
    return TravelTimeFunction(times, make_fifo(times, travels))
