"""Rest-to-rest Bezier transitions and piecewise setpoint schedules."""

from dataclasses import dataclass, field
from math import comb

import numpy as np


@dataclass(frozen=True)
class BezierTransition:
    """Bezier move from ``y0`` at ``t0`` to ``yf`` at ``tf``.

    The control polygon repeats ``y0`` on its first half and ``yf`` on its
    second half, so with degree 5 the first and second derivatives vanish at
    both ends.
    """

    y0: float
    yf: float
    t0: float
    tf: float
    degree: int = 5
    control_points: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        if self.degree < 1:
            raise ValueError("degree must be positive")
        n = self.degree
        n_low = (n + 1) // 2
        points = (float(self.y0),) * n_low + (float(self.yf),) * (n + 1 - n_low)
        object.__setattr__(self, "control_points", points)

    def __call__(self, t):
        return bezier_eval(self, t)


def _bernstein(points, s):
    n = len(points) - 1
    if n < 0:
        return 0.0
    return sum(comb(n, k) * s**k * (1.0 - s) ** (n - k) * p for k, p in enumerate(points))


def _hodograph(points):
    n = len(points) - 1
    return [n * (points[k + 1] - points[k]) for k in range(n)]


def bezier_eval(tr, t):
    """Value and first two time derivatives ``(y, y', y'')`` at ``t``.

    Outside [t0, tf] the transition is held at its end values.
    """
    if t <= tr.t0:
        return tr.y0, 0.0, 0.0
    if t >= tr.tf:
        return tr.yf, 0.0, 0.0
    span = tr.tf - tr.t0
    s = (t - tr.t0) / span
    p0 = tr.control_points
    p1 = _hodograph(p0)
    p2 = _hodograph(p1)
    return _bernstein(p0, s), _bernstein(p1, s) / span, _bernstein(p2, s) / span**2


class SetpointSchedule:
    """Piecewise-constant setpoints with optional Bezier smoothing.

    ``steps`` is a list of ``(time, value)`` pairs sorted by time; the first
    pair gives the initial value.  :meth:`setpoint` returns the raw staircase
    (what MFPC tracks), :meth:`reference` the smoothed reference with each
    step replaced by a transition of ``transition_time`` starting at the step.
    """

    def __init__(self, steps, transition_time=None, degree=5):
        if not steps:
            raise ValueError("schedule needs at least one (time, value) pair")
        steps = [(float(t), float(v)) for t, v in steps]
        times = [t for t, _ in steps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be strictly increasing")
        self.steps = steps
        self.transition_time = transition_time
        self.transitions = []
        if transition_time:
            for (_, v_prev), (t, v) in zip(steps, steps[1:]):
                self.transitions.append(BezierTransition(v_prev, v, t, t + transition_time, degree))
        self._times = np.array(times)

    def _index(self, t):
        return max(int(np.searchsorted(self._times, t, side="right")) - 1, 0)

    def setpoint(self, t):
        return self.steps[self._index(t)][1]

    def reference(self, t):
        i = self._index(t)
        if i == 0 or not self.transitions:
            return self.steps[i][1], 0.0, 0.0
        return bezier_eval(self.transitions[i - 1], t)

    def holds(self, end_time):
        """``(start, stop, value)`` for each constant segment up to ``end_time``."""
        out = []
        for i, (t, v) in enumerate(self.steps):
            stop = self.steps[i + 1][0] if i + 1 < len(self.steps) else end_time
            if t < end_time:
                out.append((t, min(stop, end_time), v))
        return out
