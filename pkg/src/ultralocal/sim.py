"""Fixed-step closed-loop simulation of the benchmark plants.

Time is counted in integer integrator steps so that estimator samples and
control decisions always land exactly on the integration lattice.
"""

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SimulationAbort, SingularStateError, UltraLocalError
from .estimation import UltraLocalModel
from .heol import heol_step, make_reactor_channels, make_tank_channel, reactor_nominal, tank_nominal
from .mfpc import HorizonPolicy, MFPCController
from .plants import (
    ReactorParams,
    TankParams,
    check_constraints,
    project_levels,
    reactor_rhs,
    tank_rhs,
)
from .reference import SetpointSchedule

COLUMNS = {
    "tank": ("t", "h1", "h2", "y_meas", "y_ref", "u", "u_star", "F_est"),
    "reactor": (
        "t", "c", "T", "h", "c_meas", "h_meas", "c_ref", "h_ref",
        "Tc", "F", "Tc_star", "F_star", "F_est_c", "F_est_h",
    ),
}
TIME_UNITS = {"tank": "s", "reactor": "min"}
STEADY_FRACTION = 0.25


def rk4_step(rhs, state, inputs, dt, t=0.0):
    """Classical RK4 step of ``x' = rhs(x, inputs)`` with inputs held constant."""
    x = np.asarray(state, float)
    k1 = np.asarray(rhs(x, inputs), float)
    k2 = np.asarray(rhs(x + 0.5 * dt * k1, inputs), float)
    k3 = np.asarray(rhs(x + 0.5 * dt * k2, inputs), float)
    k4 = np.asarray(rhs(x + dt * k3, inputs), float)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise SingularStateError(f"non-finite derivative at t={t!r}")
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class SimLog:
    """One row per control period; columns fixed per plant kind."""

    plant: str
    columns: tuple
    data: np.ndarray
    u_req: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name):
        if name in self.u_req:
            return self.u_req[name]
        return self.data[:, self.columns.index(name)]

    def __contains__(self, name):
        return name in self.columns or name in self.u_req

    def __len__(self):
        return self.data.shape[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.data:
                writer.writerow(format(x, ".17g") for x in row)

    @classmethod
    def from_csv(cls, path, plant):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        columns = tuple(rows[0])
        if columns != COLUMNS[plant]:
            raise ValueError(f"unexpected CSV header {columns}")
        data = np.array([[float(x) for x in r] for r in rows[1:]], float)
        return cls(plant, columns, data)


# ---------------------------------------------------------------------------
# plant adapters


class _Plant:
    controls = ()
    outputs = ()

    def rhs(self, x, u):
        raise NotImplementedError

    def measure(self, x):
        raise NotImplementedError


class _Reactor(_Plant):
    controls = ("Tc", "F")
    outputs = ("c", "h")

    def __init__(self, params, disturbance):
        self.nominal_params = params
        self.params = params
        self.disturbed = params
        self._onset = math.inf
        if disturbance is not None:
            self.disturbed = replace(params, F0=params.F0 * (1.0 + disturbance.magnitude))
            self._onset = disturbance.onset

    def project(self, x):
        return x

    def update(self, t):
        if self.disturbed is not self.nominal_params and t >= self._onset - 1e-12:
            self.params = self.disturbed

    def rhs(self, x, u):
        return reactor_rhs(x, u[0], u[1], self.params)

    @staticmethod
    def measure(x):
        return {"c": x[0], "T": x[1], "h": x[2]}


class _Tank(_Plant):
    controls = ("u",)
    outputs = ("h2",)

    def __init__(self, params):
        self.params = params

    def update(self, t):
        pass

    def project(self, x):
        return project_levels(x)

    def rhs(self, x, u):
        return tank_rhs(x, u[0], self.params)

    @staticmethod
    def measure(x):
        return {"h2": x[1]}


# ---------------------------------------------------------------------------
# controller adapters: every loop owns one output and one control


class _MFPCLoop:
    def __init__(self, controller, schedule):
        self.ctl = controller
        self.schedule = schedule

    @property
    def F_est(self):
        return self.ctl.F_est

    def reference(self, t):
        return self.schedule.setpoint(t)

    def nominal_control(self, t):
        return math.nan

    def observe(self, t, meas, y):
        self.ctl.observe(t, y)

    def decide(self, t, meas, y):
        if not self.ctl.window.full:
            # bootstrap: hold the operating input until the estimator has data
            self.ctl.estimate()
            return self.ctl.u_held
        return self.ctl.step(t, y)

    def commit(self, t, u):
        self.ctl.commit(u)


class _HEOLLoop:
    def __init__(self, channel, nominal):
        self.channel = channel
        self.nominal = nominal

    @property
    def F_est(self):
        return self.channel.F_est

    def reference(self, t):
        return self.nominal.y_star(t)

    def nominal_control(self, t):
        return self.nominal.u_star(t)

    def observe(self, t, meas, y):
        self.channel.observe(t, y - self.nominal.y_star(t), meas)

    def decide(self, t, meas, y):
        return heol_step(self.channel, t, y, self.nominal, meas)

    def commit(self, t, u):
        self.channel.commit(u - self.nominal.u_star(t))


def _schedules(sc):
    return {
        name: SetpointSchedule(steps, sc.transition_time)
        for name, steps in sc.setpoints.items()
    }


def build(sc):
    """Instantiate the true plant and one control loop per output."""
    kind = sc.plant.kind
    ctl = sc.controller
    dt_e = sc.sim.dt_estimator
    schedules = _schedules(sc)
    if kind == "reactor":
        params = ReactorParams(**sc.plant.params.model_dump())
        plant = _Reactor(params, sc.disturbance)
    else:
        params = TankParams(**sc.plant.params.model_dump(), nabla=sc.uncertainty)
        plant = _Tank(params)

    loops = {}
    if ctl.kind == "mfpc":
        replan = ctl.horizon.replan_period or sc.sim.dt_control
        if ctl.horizon.mode == "shrinking":
            policy = HorizonPolicy("shrinking", replan, final_time=sc.sim.duration)
        else:
            policy = HorizonPolicy("receding", replan, horizon_length=ctl.horizon.length)
        controls = dict(zip(plant.outputs, plant.controls))
        for name in plant.outputs:
            model = UltraLocalModel(ctl.channels[name].alpha, dt_e, ctl.window_length)
            u0 = sc.plant.initial_controls[controls[name]]
            loops[name] = _MFPCLoop(MFPCController(model, policy, schedules[name].setpoint, u0, sc.sim.dt_control), schedules[name])
    elif kind == "reactor":
        ch_c, ch_h = make_reactor_channels(
            params, ctl.channels["c"].gain, ctl.channels["h"].gain, dt_e, ctl.window_length
        )
        nom_c, nom_h, _ = reactor_nominal(
            schedules["c"].reference, schedules["h"].reference, params, sc.sim.dt_integrator
        )
        loops = {"c": _HEOLLoop(ch_c, nom_c), "h": _HEOLLoop(ch_h, nom_h)}
    else:
        channel = make_tank_channel(params.nominal(), ctl.channels["h2"].gain, dt_e, ctl.window_length)
        loops = {"h2": _HEOLLoop(channel, tank_nominal(schedules["h2"].reference, params))}
    return plant, loops, schedules


def _ratio(a, b):
    return int(round(a / b))


def run_closed_loop(sc):
    """Simulate a scenario and return its :class:`SimLog`.

    Same scenario and seed give a bitwise-identical log.  Noise is drawn from
    numpy's PCG64 generator (``default_rng(seed)``), one standard normal per
    measured output per estimator sample, in output order.
    """
    kind = sc.plant.kind
    cfg = sc.sim
    plant, loops, schedules = build(sc)
    dt = cfg.dt_integrator
    n_est = _ratio(cfg.dt_estimator, dt)
    n_ctl = _ratio(cfg.dt_control, dt)
    n_total = _ratio(cfg.duration, dt)
    rng = np.random.default_rng(cfg.seed)

    x = np.array([sc.plant.initial_state[k] for k in (("c", "T", "h") if kind == "reactor" else ("h1", "h2"))])
    u = np.array([sc.plant.initial_controls[k] for k in plant.controls], float)
    u_req = u.copy()
    rows, requests = [], []
    meas, y = {}, {}
    channel = "-"
    t = 0.0
    try:
        for n in range(n_total + 1):
            t = n * dt
            plant.update(t)
            if n % n_est == 0:
                meas = plant.measure(x)
                y = {}
                for name in plant.outputs:
                    noise = rng.standard_normal() * cfg.noise_std if cfg.noise_std > 0 else 0.0
                    y[name] = meas[name] + noise
                for name, loop in loops.items():
                    channel = name
                    loop.observe(t, meas, y[name])
            if n % n_ctl == 0:
                if n < n_total:
                    for i, name in enumerate(plant.outputs):
                        channel = name
                        u_req[i] = loops[name].decide(t, meas, y[name])
                    u = u_req.copy()
                    if kind == "tank":
                        u = np.maximum(u, 0.0)
                    for i, name in enumerate(plant.outputs):
                        loops[name].commit(t, u[i])
                rows.append(_row(kind, t, x, y, loops, u))
                requests.append(u_req.copy())
            if n < n_total:
                channel = "plant"
                x = plant.project(rk4_step(plant.rhs, x, u, dt, t))
    except UltraLocalError as err:
        raise SimulationAbort(t, channel, err) from err

    data = np.array(rows)
    requests = np.array(requests)
    log = SimLog(
        kind,
        COLUMNS[kind],
        data,
        u_req={f"{c}_req": requests[:, i] for i, c in enumerate(plant.controls)},
        meta={
            "name": sc.name,
            "controller": sc.controller.kind,
            "time_unit": TIME_UNITS[kind],
            "dt_control": cfg.dt_control,
            "holds": {name: s.holds(cfg.duration) for name, s in schedules.items()},
        },
    )
    return log


def _row(kind, t, x, y, loops, u):
    if kind == "tank":
        loop = loops["h2"]
        return (t, x[0], x[1], y["h2"], loop.reference(t), u[0], loop.nominal_control(t), loop.F_est)
    lc, lh = loops["c"], loops["h"]
    return (
        t, x[0], x[1], x[2], y["c"], y["h"], lc.reference(t), lh.reference(t),
        u[0], u[1], lc.nominal_control(t), lh.nominal_control(t), lc.F_est, lh.F_est,
    )


# ---------------------------------------------------------------------------
# metrics

OUTPUT_COLUMNS = {"tank": {"h2": ("h2", "y_ref")}, "reactor": {"c": ("c", "c_ref"), "h": ("h", "h_ref")}}
CONTROL_COLUMNS = {"tank": ("u",), "reactor": ("Tc", "F")}


def steady_error(t, y, holds, fraction=STEADY_FRACTION):
    """Worst, over hold segments, of the mean |y - setpoint| on each hold's tail."""
    worst = 0.0
    for start, stop, value in holds:
        tail = stop - fraction * (stop - start)
        mask = (t >= tail - 1e-9) & (t <= stop + 1e-9)
        if mask.any():
            worst = max(worst, float(np.mean(np.abs(y[mask] - value))))
    return worst


def compute_metrics(log, plant=None):
    """Flat dictionary of tracking, constraint and effort figures."""
    plant = plant or log.plant
    t = log["t"]
    dt = log.meta.get("dt_control", float(t[1] - t[0]) if len(t) > 1 else 0.0)
    out = {}
    for name, (col, ref) in OUTPUT_COLUMNS[plant].items():
        err = log[col] - log[ref]
        out[f"rmse_{name}"] = float(np.sqrt(np.mean(err**2)))
        out[f"max_err_{name}"] = float(np.max(np.abs(err)))
        out[f"terminal_err_{name}"] = float(abs(err[-1]))
        holds = log.meta.get("holds", {}).get(name)
        if holds:
            out[f"steady_err_{name}"] = steady_error(t, log[col], holds)
    for col in CONTROL_COLUMNS[plant]:
        u = log[col]
        out[f"effort_{col}"] = float(np.sum(u[:-1] ** 2) * dt)
    if plant == "tank":
        report = check_constraints(log, "tank")
        out["violations"] = report.count
        out["clamped"] = report.clamped
        out["worst_u"] = report.worst_u
        out["worst_h"] = report.worst_h
    else:
        out["violations"] = 0
    return out
