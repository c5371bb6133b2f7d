"""HEOL: flatness-based feedforward plus an intelligent-proportional homeostat.

Around a nominal trajectory (y*, u*) the deviation dy = y - y* is modelled by

    d(dy)/dt = F + alpha(t) * du

and the iP law du = -(F_est + K dy) / alpha gives (d/dt + K) dy = 0.
"""

import math
from dataclasses import dataclass

from .errors import EstimationUnavailable, SingularGainError
from .estimation import SampleWindow, estimate_F
from .plants import reactor_flat_inverse, reactor_temperature, tank_flat_inverse

ALPHA_MIN = 1e-12


class HomeostatChannel:
    """One homeostat loop: gain, possibly state-dependent alpha, and its window.

    ``alpha_fn`` maps the measurement record (a mapping of plant variable
    names to values) to the current alpha.
    """

    def __init__(self, alpha_fn, gain, estimator_period, window_length, name=""):
        if not gain > 0:
            raise ValueError("gain K must be positive")
        n = window_length / estimator_period
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise ValueError("window_length must be a positive multiple of estimator_period")
        self.name = name
        self.alpha_fn = alpha_fn
        self.gain = float(gain)
        self.window = SampleWindow(estimator_period, int(round(n)) + 1)
        self.du_held = 0.0
        self.F_est = 0.0

    def alpha(self, meas):
        a = self.alpha_fn(meas)
        if not math.isfinite(a) or abs(a) < ALPHA_MIN:
            raise SingularGainError(f"alpha={a!r} on channel {self.name!r}")
        return a

    def observe(self, t, dy, meas):
        """Record the deviation and the correction currently being applied."""
        self.window.push(t, dy, self.alpha(meas) * self.du_held)

    def estimate(self):
        try:
            self.F_est = estimate_F(self.window)
        except EstimationUnavailable:
            self.F_est = 0.0
        return self.F_est

    def correction(self, dy, meas, F_est=None):
        """iP correction; ``F_est`` overrides the windowed estimate when given."""
        a = self.alpha(meas)
        if F_est is None:
            F_est = self.estimate()
        else:
            self.F_est = F_est
        return -(F_est + self.gain * dy) / a

    def commit(self, du_applied):
        self.du_held = float(du_applied)


@dataclass(frozen=True)
class NominalTrajectory:
    """Reference output and the feedforward control that produces it."""

    y_star: object
    u_star: object

    def __call__(self, t):
        return self.y_star(t), self.u_star(t)


def heol_step(channel, t, y_meas, nominal, plant_meas, F_est=None):
    """One HEOL decision at time ``t``; returns the total control u* + du.

    The sample at ``t`` is pushed first unless the caller already did so.
    """
    y_star, u_star = nominal(t)
    dy = y_meas - y_star
    if channel.window.last_time is None or channel.window.last_time < t:
        channel.observe(t, dy, plant_meas)
    du = channel.correction(dy, plant_meas, F_est)
    channel.commit(du)
    return u_star + du


def reactor_alpha_c(p):
    """alpha of the concentration homeostat, evaluated from measured (c, T)."""
    scale = 2.0 * p.E_over_R * p.U * p.k0 / (p.Cp * p.r * p.rho)

    def alpha_c(meas):
        c, T = meas["c"], meas["T"]
        if not (c > 0 and T > 0):
            raise SingularGainError(f"alpha_c undefined at c={c!r}, T={T!r}")
        return -scale * math.exp(-p.E_over_R / T) * c / T**2

    return alpha_c


def make_reactor_channels(params, K_c=1.0, K_h=1.0, estimator_period=0.1, window_length=1.0):
    """Concentration channel (du = dTc) and level channel (du = dF)."""
    alpha_h = -1.0 / params.area
    channel_c = HomeostatChannel(reactor_alpha_c(params), K_c, estimator_period, window_length, "c")
    channel_h = HomeostatChannel(lambda meas: alpha_h, K_h, estimator_period, window_length, "h")
    return channel_c, channel_h


def make_tank_channel(params, K=0.1, estimator_period=0.1, window_length=1.0):
    """Lower-tank level channel; alpha = 1/s2 is constant."""
    if not params.s2 > 0:
        raise ValueError("s2 must be positive")
    alpha = 1.0 / params.s2
    return HomeostatChannel(lambda meas: alpha, K, estimator_period, window_length, "h2")


def reactor_nominal(c_ref, h_ref, params, dt_diff=0.01):
    """Nominal trajectories for both reactor channels.

    ``c_ref`` and ``h_ref`` return ``(y, y', y'')`` at a time.  The temperature
    derivative needed by the inverse is a central difference of the recovered
    temperature with step ``dt_diff``.
    """

    def temperature(t):
        c, c_dot, _ = c_ref(t)
        h, _, _ = h_ref(t)
        return reactor_temperature(c, c_dot, h, params)

    def controls(t):
        c, c_dot, _ = c_ref(t)
        h, h_dot, _ = h_ref(t)
        T_dot = (temperature(t + dt_diff) - temperature(t - dt_diff)) / (2.0 * dt_diff)
        F, Tc, _ = reactor_flat_inverse(c, c_dot, h, h_dot, T_dot, params, T=temperature(t))
        return F, Tc

    nominal_c = NominalTrajectory(lambda t: c_ref(t)[0], lambda t: controls(t)[1])
    nominal_h = NominalTrajectory(lambda t: h_ref(t)[0], lambda t: controls(t)[0])
    return nominal_c, nominal_h, temperature


def tank_nominal(h2_ref, params):
    """Nominal lower-tank trajectory and the inflow that realises it."""
    return NominalTrajectory(
        lambda t: h2_ref(t)[0],
        lambda t: tank_flat_inverse(*h2_ref(t), params.nominal())[1],
    )
