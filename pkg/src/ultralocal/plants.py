"""Benchmark plants: a stirred chemical reactor and a two-tank system.

Reactor time is in minutes, tank time in seconds.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleTrajectoryError, SingularStateError

# an RK4 stage may undershoot an emptying tank by this much (m) before we give up
LEVEL_SLACK = 1e-4
LEVEL_MAX = 10.0


@dataclass(frozen=True)
class ReactorParams:
    F0: float = 0.1
    T0: float = 350.0
    c0: float = 1.0
    r: float = 0.2149
    k0: float = 7.2e10
    E_over_R: float = 8750.0
    U: float = 54.94
    rho: float = 1000.0
    Cp: float = 0.2149
    dH: float = -5.0e4

    def __post_init__(self):
        for name in ("r", "k0", "rho", "Cp", "E_over_R"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def area(self):
        return math.pi * self.r**2

    def rate(self, T):
        return self.k0 * math.exp(-self.E_over_R / T)


@dataclass(frozen=True)
class ReactorState:
    c: float
    T: float
    h: float

    def as_array(self):
        return np.array([self.c, self.T, self.h])


def reactor_rhs(state, Tc, F, p):
    """Time derivatives (dc/dt, dT/dt, dh/dt) of the reactor."""
    c, T, h = (float(v) for v in state)
    if not h > 0 or not T > 0:
        raise SingularStateError(f"reactor state c={c!r}, T={T!r}, h={h!r} is not physical")
    A = p.area
    kc = p.rate(T) * c
    dilution = p.F0 / (A * h)
    dc = dilution * (p.c0 - c) - kc
    dT = dilution * (p.T0 - T) - p.dH / (p.rho * p.Cp) * kc + 2.0 * p.U / (p.r * p.rho * p.Cp) * (Tc - T)
    dh = (p.F0 - F) / A
    return dc, dT, dh


def reactor_temperature(c, c_dot, h, p):
    """Temperature that makes the concentration balance hold for (c, dc/dt, h)."""
    if not (c > 0 and h > 0):
        raise InfeasibleTrajectoryError(f"need c > 0 and h > 0, got c={c!r}, h={h!r}")
    arg = (p.F0 * (p.c0 - c) / (p.area * h) - c_dot) / (p.k0 * c)
    if not 0.0 < arg < 1.0:
        raise InfeasibleTrajectoryError(f"reaction-rate ratio {arg!r} outside (0, 1)")
    return -p.E_over_R / math.log(arg)


def reactor_flat_inverse(c, c_dot, h, h_dot, T_dot, p, T=None):
    """Controls (F, Tc) and temperature T reproducing a flat-output trajectory.

    ``T_dot`` has to be supplied by the caller (usually by differencing the
    recovered temperature along the reference); ``T`` may be passed in to
    avoid recomputing it.
    """
    if T is None:
        T = reactor_temperature(c, c_dot, h, p)
    F = p.F0 - p.area * h_dot
    kc = p.rate(T) * c
    Tc = T + (p.r * p.rho * p.Cp) / (2.0 * p.U) * (
        T_dot - p.F0 * (p.T0 - T) / (p.area * h) + p.dH / (p.rho * p.Cp) * kc
    )
    return F, Tc, T


@dataclass(frozen=True)
class TankParams:
    s1: float = 1.0
    s2: float = 1.0
    k1: float = 0.6
    k2: float = 0.5
    nabla: float = 0.0

    def __post_init__(self):
        for name in ("s1", "s2", "k1", "k2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not abs(self.nabla) < 1:
            raise ValueError("nabla must satisfy |nabla| < 1")

    @property
    def k1_eff(self):
        return self.k1 * (1.0 + self.nabla)

    @property
    def k2_eff(self):
        return self.k2 * (1.0 - self.nabla)

    def nominal(self):
        """The model the controller believes in (no uncertainty)."""
        return replace(self, nabla=0.0)


def project_levels(state):
    """Clip levels that undershot zero while a tank drained empty."""
    return np.maximum(np.asarray(state, float), 0.0)


@dataclass(frozen=True)
class TankState:
    h1: float
    h2: float

    def as_array(self):
        return np.array([self.h1, self.h2])


def _sqrt_level(h, name):
    if h < -LEVEL_SLACK or not math.isfinite(h):
        raise SingularStateError(f"level {name}={h!r} is negative")
    return math.sqrt(h) if h > 0 else 0.0


def tank_rhs(state, u, p):
    """Level derivatives (dh1/dt, dh2/dt); uncertainty ``nabla`` is applied.

    Slightly negative levels (within LEVEL_SLACK) count as an empty tank.
    """
    h1, h2 = (float(v) for v in state)
    q1 = p.k1_eff * _sqrt_level(h1, "h1")
    q2 = p.k2_eff * _sqrt_level(h2, "h2")
    return (u - q1) / p.s1, (q1 - q2) / p.s2


def tank_flat_inverse(h2, h2_dot, h2_ddot, p):
    """Upper-tank level and inflow ``(h1, u)`` for a desired lower level.

    Uses the nominal coefficients k1, k2 (``nabla`` is ignored, it belongs to
    the simulated plant only).
    """
    if h2 < 0:
        raise InfeasibleTrajectoryError(f"h2={h2!r} is negative")
    root = math.sqrt(h2)
    g = p.s2 * h2_dot + p.k2 * root
    if g < 0:
        raise InfeasibleTrajectoryError(
            f"s2*dh2/dt + k2*sqrt(h2) = {g!r} < 0: upper tank would need a negative level"
        )
    if h2_dot == 0.0:
        g_dot = p.s2 * h2_ddot
    elif root > 0:
        g_dot = p.s2 * h2_ddot + p.k2 * h2_dot / (2.0 * root)
    else:
        raise InfeasibleTrajectoryError("h2 = 0 with nonzero slope has no finite inverse")
    h1 = (g / p.k1) ** 2
    h1_dot = 2.0 * g * g_dot / p.k1**2
    u = p.s1 * h1_dot + g
    return h1, u


@dataclass
class ConstraintReport:
    """Violations of u >= 0 and 0 <= h <= 10 in a finished tank run."""

    u_violations: int = 0
    h_violations: int = 0
    worst_u: float = 0.0
    worst_h: float = 0.0
    clamped: int = 0

    @property
    def count(self):
        return self.u_violations + self.h_violations

    @property
    def ok(self):
        return self.count == 0


def check_constraints(log, plant="tank"):
    """Count constraint violations in a tank log.

    ``worst_u`` is the most negative applied control; ``worst_h`` the level
    reading lying furthest outside [0, 10].  Requests that were
    clamped to zero before application are counted separately in ``clamped``
    and are not violations.
    """
    if plant != "tank":
        raise ValueError("constraints are only defined for the tank plant")
    u = np.asarray(log["u"], float)
    levels = np.concatenate([np.asarray(log["h1"], float), np.asarray(log["h2"], float)])
    report = ConstraintReport()
    bad_u = u < 0
    report.u_violations = int(bad_u.sum())
    if report.u_violations:
        report.worst_u = float(u[bad_u].min())
    below = np.minimum(levels, 0.0)
    above = np.maximum(levels - LEVEL_MAX, 0.0)
    excursion = np.where(above > 0, above, below)
    bad_h = excursion != 0
    report.h_violations = int(bad_h.sum())
    if report.h_violations:
        worst = excursion[np.argmax(np.abs(excursion))]
        report.worst_h = float(worst + LEVEL_MAX if worst > 0 else worst)
    if "u_req" in log:
        report.clamped = int((np.asarray(log["u_req"], float) < 0).sum())
    return report
