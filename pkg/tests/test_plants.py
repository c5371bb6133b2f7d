import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultralocal.errors import InfeasibleTrajectoryError, SingularStateError
from ultralocal.plants import (
    ReactorParams,
    TankParams,
    check_constraints,
    reactor_flat_inverse,
    reactor_rhs,
    reactor_temperature,
    tank_flat_inverse,
    tank_rhs,
)
from ultralocal.reference import BezierTransition, bezier_eval

P = ReactorParams()
OP = (0.878, 324.5, 0.659)


def rk4(f, x, t, dt):
    k1 = f(t, x)
    k2 = f(t + dt / 2, x + dt / 2 * k1)
    k3 = f(t + dt / 2, x + dt / 2 * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# reactor


def test_level_is_steady_when_outflow_matches_inflow():
    assert reactor_rhs(OP, 300.0, 0.1, P)[2] == 0.0


def test_operating_point_regression():
    # pinned from an independent evaluation of the balance equations
    dc, dT, dh = reactor_rhs(OP, 300.0, 0.1, P)
    assert dc == pytest.approx(0.004497762503273731, rel=1e-12)
    assert dT == pytest.approx(-2.9800200988283834, rel=1e-12)
    assert dh == 0.0


def test_doubling_level_halves_dilution():
    c, T, h = OP
    base = reactor_rhs((c, T, h), 300.0, 0.1, P)
    doubled = reactor_rhs((c, T, 2 * h), 300.0, 0.1, P)
    dilution = P.F0 * (P.c0 - c) / (P.area * h)
    assert base[0] - doubled[0] == pytest.approx(dilution / 2, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(0.1, 1.0), T=st.floats(250, 450), F=st.floats(0.0, 0.3))
def test_level_balance_ignores_composition(c, T, F):
    assert reactor_rhs((c, T, 0.7), 300.0, F, P)[2] == reactor_rhs(OP, 310.0, F, P)[2]


def test_reactor_rejects_empty_vessel():
    with pytest.raises(SingularStateError):
        reactor_rhs((0.8, 320.0, 0.0), 300.0, 0.1, P)


def test_flat_inverse_constant_level_gives_nominal_flow():
    F, _, _ = reactor_flat_inverse(0.878, 0.0, 0.659, 0.0, 0.0, P)
    assert F == 0.1


def _reactor_run(Tc, F, minutes=5.0, dt=0.001):
    f = lambda t, x: np.array(reactor_rhs(x, Tc, F, P))  # noqa: E731
    x = np.array(OP)
    out = [(0.0, x.copy())]
    n = int(round(minutes / dt))
    for k in range(n):
        x = rk4(f, x, k * dt, dt)
        if (k + 1) % 500 == 0:
            out.append(((k + 1) * dt, x.copy()))
    return out


@pytest.mark.parametrize("Tc,F", [(300.0, 0.1), (305.0, 0.11)])
def test_reactor_round_trip(Tc, F):
    for _, x in _reactor_run(Tc, F):
        c_dot, T_dot, h_dot = reactor_rhs(x, Tc, F, P)
        F_rec, Tc_rec, T_rec = reactor_flat_inverse(x[0], c_dot, x[2], h_dot, T_dot, P)
        assert F_rec == pytest.approx(F, rel=1e-4)
        assert Tc_rec == pytest.approx(Tc, rel=1e-4)
        assert T_rec == pytest.approx(x[1], rel=1e-6)


def test_temperature_recovered_at_operating_point():
    c_dot = reactor_rhs(OP, 300.0, 0.1, P)[0]
    assert reactor_temperature(OP[0], c_dot, OP[2], P) == pytest.approx(324.5, abs=1e-3)


def test_temperature_infeasible_when_no_reaction_needed():
    with pytest.raises(InfeasibleTrajectoryError):
        reactor_temperature(0.878, 1.0, 0.659, P)


# two tanks


def test_tank_rest_and_equilibrium():
    p = TankParams()
    assert tank_rhs((0.0, 0.0), 0.0, p) == (0.0, 0.0)
    h2 = 4.0
    u = 0.5 * math.sqrt(h2)
    h1 = (u / 0.6) ** 2
    d1, d2 = tank_rhs((h1, h2), u, p)
    assert abs(d1) < 1e-15 and abs(d2) < 1e-15


def test_tank_hand_arithmetic():
    d1, d2 = tank_rhs((4.0, 1.0), 2.0, TankParams())
    assert d1 == pytest.approx(0.8, abs=1e-15)
    assert d2 == pytest.approx(0.7, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(h1=st.floats(0.01, 9.0), dh=st.floats(0.01, 1.0), h2=st.floats(0.0, 10.0), u=st.floats(0, 3))
def test_lower_tank_inflow_grows_with_upper_level(h1, dh, h2, u):
    p = TankParams()
    assert tank_rhs((h1 + dh, h2), u, p)[1] > tank_rhs((h1, h2), u, p)[1]


@settings(max_examples=100, deadline=None)
@given(h1=st.floats(0, 10), h2=st.floats(0, 10), u=st.floats(0, 3))
def test_zero_uncertainty_matches_nominal(h1, h2, u):
    p = TankParams(nabla=0.0)
    assert tank_rhs((h1, h2), u, p) == tank_rhs((h1, h2), u, p.nominal())


def test_uncertainty_scales_outflows():
    p = TankParams(nabla=0.2)
    assert p.k1_eff == pytest.approx(0.72) and p.k2_eff == pytest.approx(0.4)


def test_negative_level_beyond_slack_raises():
    with pytest.raises(SingularStateError):
        tank_rhs((-0.01, 1.0), 0.0, TankParams())
    # tiny undershoot from an RK4 stage counts as empty
    assert tank_rhs((-1e-6, 0.0), 0.0, TankParams()) == (0.0, 0.0)


def test_tank_inverse_constant_level():
    h1, u = tank_flat_inverse(4.0, 0.0, 0.0, TankParams())
    assert h1 == pytest.approx(25 / 9, rel=1e-14)
    assert u == pytest.approx(1.0, rel=1e-14)
    assert tank_flat_inverse(0.0, 0.0, 0.0, TankParams()) == (0.0, 0.0)


def test_tank_inverse_rejects_draining_faster_than_possible():
    with pytest.raises(InfeasibleTrajectoryError):
        tank_flat_inverse(1.0, -1.0, 0.0, TankParams())


def test_tank_round_trip_along_bezier():
    p = TankParams()
    tr = BezierTransition(4.0, 6.0, 5.0, 25.0)

    def f(t, x):
        _, u = tank_flat_inverse(*bezier_eval(tr, t), p)
        return np.array(tank_rhs(x, u, p))

    x, dt, worst = np.array([25 / 9, 4.0]), 0.01, 0.0
    for k in range(3000):
        x = rk4(f, x, k * dt, dt)
        worst = max(worst, abs(x[1] - bezier_eval(tr, (k + 1) * dt)[0]))
    assert worst <= 1e-3


def test_constraint_report():
    zeros = {"u": np.zeros(5), "h1": np.zeros(5), "h2": np.zeros(5)}
    assert check_constraints(zeros).count == 0
    log = {"u": np.array([0.0, -0.1, 0.2]), "h1": np.ones(3), "h2": np.ones(3)}
    rep = check_constraints(log)
    assert rep.count == 1 and rep.worst_u == -0.1
    high = {"u": np.ones(2), "h1": np.array([1.0, 10.5]), "h2": np.ones(2)}
    rep = check_constraints(high)
    assert rep.h_violations == 1 and rep.worst_h == 10.5


def test_clamped_requests_are_not_violations():
    log = {"u": np.array([0.0, 0.3]), "u_req": np.array([-0.4, 0.3]), "h1": np.ones(2), "h2": np.ones(2)}
    rep = check_constraints(log)
    assert rep.ok and rep.clamped == 1
