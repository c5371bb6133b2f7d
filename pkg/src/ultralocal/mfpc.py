"""Model-free predictive control built on closed-form Euler-Lagrange segments.

With the unknown term frozen at a constant ``a``, minimising

    J = int_{t_i}^{t_f} (y - y_sp)^2 + ((dy/dt - a) / alpha)^2 dt

under y(t_i) = y_i, y(t_f) = y_sp gives y'' = alpha^2 (y - y_sp), whose
solution is ``y_sp + c1 exp(alpha t) + c2 exp(-alpha t)`` regardless of ``a``.
"""

import enum
import math
from dataclasses import dataclass

from .errors import DomainError, EstimationUnavailable, HorizonTooLongError
from .estimation import SampleWindow, estimate_F

# slack on the segment domain, relative to its length
_DOMAIN_RTOL = 1e-12


@dataclass(frozen=True)
class OptimalSegment:
    """One optimal trajectory, stored in shifted time ``tau = t - t_i``.

    In shifted time the deviation from the setpoint is

        d * (exp(-b tau) - exp(-b (2H - tau))) / (1 - exp(-2 b H))

    with ``b = |alpha|`` and ``H = t_f - t_i``; every exponent is non-positive
    so nothing overflows however long the horizon or late the start time.
    """

    y_i: float
    y_setpoint: float
    alpha: float
    t_i: float
    t_f: float
    _denom: float

    @property
    def horizon(self):
        return self.t_f - self.t_i

    @property
    def c1(self):
        """Coefficient of exp(alpha t) in absolute time (may overflow to inf)."""
        near, far = self._shifted_coefficients()
        # absolute form: c1 e^{alpha t} multiplies e^{+alpha tau}
        if self.alpha > 0:
            return _scaled(far, -self.alpha * self.t_i)
        return _scaled(near, -self.alpha * self.t_i)

    @property
    def c2(self):
        """Coefficient of exp(-alpha t) in absolute time (may overflow to inf)."""
        near, far = self._shifted_coefficients()
        if self.alpha > 0:
            return _scaled(near, self.alpha * self.t_i)
        return _scaled(far, self.alpha * self.t_i)

    def _shifted_coefficients(self):
        # near multiplies exp(-b tau), far multiplies exp(+b tau)
        b = abs(self.alpha)
        d = self.y_i - self.y_setpoint
        near = d / self._denom
        far = _scaled(-d / self._denom, -2.0 * b * self.horizon)
        return near, far

    def __call__(self, t):
        return eval_segment(self, t)


def _scaled(x, exponent):
    if x == 0.0:
        return 0.0
    try:
        return x * math.exp(exponent)
    except OverflowError:
        return math.copysign(math.inf, x)


def solve_segment(y_i, y_setpoint, t_i, t_f, alpha):
    """Solve the two-point boundary problem for one optimal segment."""
    if not t_f > t_i:
        raise DomainError(f"t_f={t_f!r} must exceed t_i={t_i!r}")
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    denom = -math.expm1(-2.0 * abs(alpha) * (t_f - t_i))
    if not (denom > 0.0 and math.isfinite(denom)):
        raise HorizonTooLongError(
            f"|alpha|*(t_f - t_i) = {abs(alpha) * (t_f - t_i)!r} is not representable"
        )
    return OptimalSegment(float(y_i), float(y_setpoint), float(alpha), float(t_i), float(t_f), denom)


def eval_segment(seg, t):
    """Return ``(y*, dy*/dt)`` at time ``t``."""
    slack = _DOMAIN_RTOL * max(1.0, abs(seg.t_f))
    if t < seg.t_i - slack or t > seg.t_f + slack:
        raise DomainError(f"t={t!r} outside [{seg.t_i!r}, {seg.t_f!r}]")
    tau = min(max(t - seg.t_i, 0.0), seg.horizon)
    b = abs(seg.alpha)
    d = seg.y_i - seg.y_setpoint
    e_near = math.exp(-b * tau)
    e_far = math.exp(-b * (2.0 * seg.horizon - tau))
    y = seg.y_setpoint + d * (e_near - e_far) / seg._denom
    ydot = -b * d * (e_near + e_far) / seg._denom
    return y, ydot


def mfpc_control(seg, F_est, t, alpha):
    """Control that makes the ultra-local model follow the segment at ``t``."""
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    _, ydot = eval_segment(seg, t)
    return (ydot - F_est) / alpha


def mfpc_hold_control(seg, F_est, t, hold, alpha):
    """Constant control over ``[t, t + hold]`` landing on the segment at the end.

    With ``F`` frozen at ``F_est`` the ultra-local model moves by
    ``(F_est + alpha u) * hold`` over the interval, so matching
    ``y*(t + hold)`` means using the segment's mean slope.  Unlike the
    instantaneous slope this stays stable when ``|alpha| * hold`` is large.
    """
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    y0, _ = eval_segment(seg, t)
    y1, _ = eval_segment(seg, min(t + hold, seg.t_f))
    return ((y1 - y0) / hold - F_est) / alpha


class HorizonMode(str, enum.Enum):
    SHRINKING = "shrinking"
    RECEDING = "receding"


@dataclass(frozen=True)
class HorizonPolicy:
    """Where each replanned segment ends.

    ``shrinking`` plans to the fixed ``final_time``; ``receding`` plans
    ``horizon_length`` ahead of every replan instant.
    """

    mode: HorizonMode
    replan_period: float
    final_time: float = None
    horizon_length: float = None

    def __post_init__(self):
        object.__setattr__(self, "mode", HorizonMode(self.mode))
        if self.replan_period <= 0:
            raise ValueError("replan_period must be positive")
        if self.mode is HorizonMode.RECEDING:
            if self.horizon_length is None or not self.horizon_length > self.replan_period:
                raise ValueError("receding horizon_length must exceed replan_period")
        elif self.final_time is None:
            raise ValueError("shrinking horizon needs final_time")

    def end_time(self, t_k):
        if self.mode is HorizonMode.RECEDING:
            return t_k + self.horizon_length
        if not self.final_time > t_k:
            raise DomainError(f"replan at t={t_k!r} is not before final_time={self.final_time!r}")
        return self.final_time


class MFPCController:
    """Single-output MFPC loop.

    The caller feeds measurements at the estimator rate through
    :meth:`observe` and asks for a control through :meth:`step` every
    ``control_period`` (defaults to the policy's replan period).  A new
    segment is solved from the measured output once per replan period; in
    between, the held control follows the current segment with the latest
    estimate of ``F``.  The held control is what goes into the estimator
    window, so :meth:`commit` must be told what was actually applied.
    """

    def __init__(self, model, policy, setpoint, u_initial=0.0, control_period=None):
        self.model = model
        self.policy = policy
        self.setpoint = setpoint
        self.control_period = control_period or policy.replan_period
        self.window = SampleWindow.for_model(model)
        self.u_held = float(u_initial)
        self.F_est = 0.0
        self.segment = None
        self._next_replan = -math.inf

    def observe(self, t, y_meas):
        self.window.push(t, y_meas, self.model.alpha * self.u_held)

    def estimate(self):
        try:
            self.F_est = estimate_F(self.window, self.model)
        except EstimationUnavailable:
            self.F_est = 0.0
        return self.F_est

    def step(self, t_k, y_meas):
        F_est = self.estimate()
        slack = 1e-9 * self.control_period
        if self.segment is None or t_k >= self._next_replan - slack or t_k >= self.segment.t_f - slack:
            self.segment = solve_segment(
                y_meas, self.setpoint(t_k), t_k, self.policy.end_time(t_k), self.model.alpha
            )
            self._next_replan = t_k + self.policy.replan_period
        return mfpc_hold_control(self.segment, F_est, t_k, self.control_period, self.model.alpha)

    def commit(self, u_applied):
        self.u_held = float(u_applied)


def mfpc_step(controller, t_k, y_meas):
    return controller.step(t_k, y_meas)
