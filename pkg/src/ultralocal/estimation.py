"""Ultra-local model and the windowed integral estimator of its unknown term.

The first-order ultra-local model replaces the plant by

    dy/dt = F + alpha * u

where ``F`` lumps everything that is not known.  ``F`` is recovered from a
short window of past samples by

    F_est(t) = -6/T^3 * int_0^T [(T - 2s) y(t-T+s) + (T - s) s (alpha u)(t-T+s)] ds

The same estimator serves the homeostat of the HEOL controller, where the
streams are the deviations (dy, alpha * du) and alpha may vary in time; this
is why the window stores the product ``alpha * u`` rather than ``u``.
"""

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EstimationUnavailable, TimingError

# relative tolerance on sample spacing
SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class UltraLocalModel:
    """Gain and sampling metadata of one ultra-local loop."""

    alpha: float
    estimator_period: float
    window_length: float

    def __post_init__(self):
        if self.alpha == 0 or not np.isfinite(self.alpha):
            raise ValueError("alpha must be nonzero")
        if self.estimator_period <= 0:
            raise ValueError("estimator_period must be positive")
        if self.window_length <= 0:
            raise ValueError("window_length must be positive")
        ratio = self.window_length / self.estimator_period
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError("window_length must be an integer multiple of estimator_period")

    @property
    def n_intervals(self):
        return int(round(self.window_length / self.estimator_period))

    @property
    def capacity(self):
        return self.n_intervals + 1


class SampleWindow:
    """Fixed-rate ring buffer of ``(t, y, alpha*u)`` samples."""

    __slots__ = ("period", "capacity", "_t", "_y", "_au")

    def __init__(self, period, capacity):
        if period <= 0:
            raise ValueError("period must be positive")
        if capacity < 2:
            raise ValueError("capacity must be at least 2")
        self.period = float(period)
        self.capacity = int(capacity)
        self._t = deque(maxlen=self.capacity)
        self._y = deque(maxlen=self.capacity)
        self._au = deque(maxlen=self.capacity)

    @classmethod
    def for_model(cls, model):
        return cls(model.estimator_period, model.capacity)

    def __len__(self):
        return len(self._t)

    @property
    def full(self):
        return len(self._t) == self.capacity

    @property
    def last_time(self):
        return self._t[-1] if self._t else None

    def push(self, t, y, au):
        """Append a sample, evicting the oldest one once at capacity.

        Raises TimingError unless ``t`` follows the last sample by exactly one
        period (to within a relative tolerance of 1e-9).
        """
        if self._t:
            gap = t - self._t[-1]
            if abs(gap - self.period) > SPACING_RTOL * max(self.period, abs(t)):
                raise TimingError(
                    f"sample at t={t!r} is {gap!r} after the previous one, expected {self.period!r}"
                )
        self._t.append(float(t))
        self._y.append(float(y))
        self._au.append(float(au))
        return self

    def clear(self):
        self._t.clear()
        self._y.clear()
        self._au.clear()

    def times(self):
        return np.fromiter(self._t, float, len(self._t))

    def values(self):
        return np.fromiter(self._y, float, len(self._y))

    def inputs(self):
        return np.fromiter(self._au, float, len(self._au))


def push_sample(window, t, y, au):
    return window.push(t, y, au)


@lru_cache(maxsize=64)
def _weights(n_intervals, length):
    """Quadrature weights for the output and input kernels.

    The samples are joined by straight lines and each kernel is integrated
    exactly against that piecewise-linear interpolant (3-point Gauss-Legendre
    per interval is exact for the cubic integrands).  This is the trapezoid
    rule's interpolant, so accuracy is second order for general signals and
    exact for affine outputs with constant inputs.
    """
    step = length / n_intervals
    nodes, gw = np.polynomial.legendre.leggauss(3)
    frac = 0.5 * (nodes + 1.0)
    gw = 0.5 * gw * step
    w_y = np.zeros(n_intervals + 1)
    w_u = np.zeros(n_intervals + 1)
    for j in range(n_intervals):
        s = (j + frac) * step
        ky = (length - 2.0 * s) * gw
        ku = (length - s) * s * gw
        w_y[j] += np.dot(ky, 1.0 - frac)
        w_y[j + 1] += np.dot(ky, frac)
        w_u[j] += np.dot(ku, 1.0 - frac)
        w_u[j + 1] += np.dot(ku, frac)
    scale = -6.0 / length**3
    w_y *= scale
    w_u *= scale
    w_y.setflags(write=False)
    w_u.setflags(write=False)
    return w_y, w_u


def kernel_weights(model):
    """Return the (output, input) weight vectors used by :func:`estimate_F`."""
    return _weights(model.n_intervals, float(model.window_length))


def estimate_F(window, model=None):
    """Estimate the unknown term of the ultra-local model over a full window.

    The window length is taken from ``model`` when given, otherwise from the
    window's own period and capacity.  Raises EstimationUnavailable until the
    window is full.
    """
    if model is not None and model.capacity != window.capacity:
        raise ValueError(f"window capacity {window.capacity} does not match model ({model.capacity})")
    if not window.full:
        raise EstimationUnavailable(f"window holds {len(window)} of {window.capacity} samples")
    if model is not None:
        w_y, w_u = kernel_weights(model)
    else:
        n = window.capacity - 1
        w_y, w_u = _weights(n, window.period * n)
    return float(np.dot(w_y, window.values()) + np.dot(w_u, window.inputs()))
