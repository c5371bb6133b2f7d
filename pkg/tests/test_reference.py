import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultralocal.reference import BezierTransition, SetpointSchedule, bezier_eval


def test_endpoints_are_at_rest():
    tr = BezierTransition(1.0, 3.0, 2.0, 7.0)
    assert bezier_eval(tr, 2.0) == (1.0, 0.0, 0.0)
    y, d1, d2 = bezier_eval(tr, 7.0)
    assert y == 3.0 and d1 == 0.0 and d2 == 0.0


def test_rest_conditions_just_inside_the_ends():
    tr = BezierTransition(0.0, 1.0, 0.0, 1.0)
    eps = 1e-7
    for t in (eps, 1.0 - eps):
        _, d1, d2 = bezier_eval(tr, t)
        assert abs(d1) <= 1e-12 and abs(d2) <= 1e-5


def test_midpoint_symmetry():
    assert bezier_eval(BezierTransition(0.0, 1.0, 0.0, 10.0), 5.0)[0] == pytest.approx(0.5, abs=1e-15)


def test_control_polygon():
    assert BezierTransition(2.0, 5.0, 0.0, 1.0).control_points == (2.0, 2.0, 2.0, 5.0, 5.0, 5.0)


@settings(max_examples=50, deadline=None)
@given(y0=st.floats(-10, 10), dy=st.floats(-10, 10), dur=st.floats(0.5, 50))
def test_derivatives_match_finite_differences(y0, dy, dur):
    tr = BezierTransition(y0, y0 + dy, 1.0, 1.0 + dur)
    delta = 1e-5 * dur
    scale = max(1.0, abs(dy))
    for s in np.linspace(0.05, 0.95, 10):
        t = 1.0 + s * dur
        y_p, d_p, _ = bezier_eval(tr, t + delta)
        y_m, d_m, _ = bezier_eval(tr, t - delta)
        _, d1, d2 = bezier_eval(tr, t)
        assert d1 == pytest.approx((y_p - y_m) / (2 * delta), abs=1e-6 * scale / dur)
        assert d2 == pytest.approx((d_p - d_m) / (2 * delta), abs=1e-6 * scale / dur**2)


@settings(max_examples=50, deadline=None)
@given(y0=st.floats(-10, 10), dy=st.floats(1e-3, 10))
def test_rising_transition_is_monotone(y0, dy):
    tr = BezierTransition(y0, y0 + dy, 0.0, 3.0)
    ys = np.array([bezier_eval(tr, t)[0] for t in np.linspace(0.0, 3.0, 1000)])
    assert np.all(np.diff(ys) >= -1e-12)


def test_invalid_transition():
    with pytest.raises(ValueError):
        BezierTransition(0.0, 1.0, 1.0, 1.0)


def test_schedule_staircase_and_smoothing():
    sched = SetpointSchedule([(0.0, 4.0), (50.0, 6.0), (150.0, 3.0)], transition_time=20.0)
    assert sched.setpoint(49.9) == 4.0
    assert sched.setpoint(50.0) == 6.0
    assert sched.reference(40.0) == (4.0, 0.0, 0.0)
    assert sched.reference(60.0)[0] == pytest.approx(5.0)
    assert sched.reference(70.0)[0] == 6.0
    assert sched.reference(200.0)[0] == 3.0
    assert sched.holds(400.0) == [(0.0, 50.0, 4.0), (50.0, 150.0, 6.0), (150.0, 400.0, 3.0)]


def test_schedule_without_smoothing_is_the_staircase():
    sched = SetpointSchedule([(0.0, 1.0), (5.0, 2.0)])
    assert sched.reference(5.0) == (2.0, 0.0, 0.0)


def test_schedule_rejects_unordered_steps():
    with pytest.raises(ValueError):
        SetpointSchedule([(0.0, 1.0), (0.0, 2.0)])
    with pytest.raises(ValueError):
        SetpointSchedule([])
