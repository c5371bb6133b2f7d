"""Scenario schema, YAML loading and the built-in presets."""

from importlib import resources
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

PRESET_NAMES = ("reactor-heol", "reactor-mfpc", "tank-heol", "tank-mfpc")

PLANT_OUTPUTS = {"reactor": ("c", "h"), "tank": ("h2",)}
PLANT_CONTROLS = {"reactor": {"c": "Tc", "h": "F"}, "tank": {"h2": "u"}}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _is_multiple(a, b):
    n = a / b
    return abs(n - round(n)) <= 1e-9 * max(1.0, n) and round(n) >= 1


class SimSettings(_Strict):
    dt_integrator: float = Field(gt=0)
    dt_control: float = Field(gt=0)
    dt_estimator: float = Field(gt=0)
    duration: float = Field(gt=0)
    seed: int = 0
    noise_std: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _lattice(self):
        if not self.dt_integrator <= self.dt_estimator <= self.dt_control:
            raise ValueError("need dt_integrator <= dt_estimator <= dt_control")
        for fine, coarse, label in (
            (self.dt_integrator, self.dt_estimator, "dt_estimator / dt_integrator"),
            (self.dt_estimator, self.dt_control, "dt_control / dt_estimator"),
            (self.dt_control, self.duration, "duration / dt_control"),
        ):
            if not _is_multiple(coarse, fine):
                raise ValueError(f"{label} must be a positive integer")
        return self


class ReactorParamsModel(_Strict):
    F0: float = 0.1
    T0: float = 350.0
    c0: float = 1.0
    r: float = Field(default=0.2149, gt=0)
    k0: float = Field(default=7.2e10, gt=0)
    E_over_R: float = Field(default=8750.0, gt=0)
    U: float = 54.94
    rho: float = Field(default=1000.0, gt=0)
    Cp: float = Field(default=0.2149, gt=0)
    dH: float = -5.0e4


class TankParamsModel(_Strict):
    s1: float = Field(default=1.0, gt=0)
    s2: float = Field(default=1.0, gt=0)
    k1: float = Field(default=0.6, gt=0)
    k2: float = Field(default=0.5, gt=0)


class ReactorPlant(_Strict):
    kind: Literal["reactor"]
    params: ReactorParamsModel = ReactorParamsModel()
    initial_state: Dict[Literal["c", "T", "h"], float] = {"c": 0.878, "T": 324.5, "h": 0.659}
    initial_controls: Dict[Literal["Tc", "F"], float] = {"Tc": 300.0, "F": 0.1}

    @field_validator("initial_state")
    @classmethod
    def _state(cls, v):
        if set(v) != {"c", "T", "h"} or min(v.values()) <= 0:
            raise ValueError("initial_state needs positive c, T and h")
        return v


class TankPlant(_Strict):
    kind: Literal["tank"]
    params: TankParamsModel = TankParamsModel()
    initial_state: Dict[Literal["h1", "h2"], float]
    initial_controls: Dict[Literal["u"], float] = {"u": 0.0}

    @field_validator("initial_state")
    @classmethod
    def _state(cls, v):
        if set(v) != {"h1", "h2"} or not all(0 <= x <= 10 for x in v.values()):
            raise ValueError("initial_state needs h1 and h2 within [0, 10]")
        return v


class ChannelSettings(_Strict):
    alpha: Optional[float] = None
    gain: Optional[float] = None

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if v is not None and v == 0:
            raise ValueError("alpha must be nonzero")
        return v

    @field_validator("gain")
    @classmethod
    def _gain(cls, v):
        if v is not None and not v > 0:
            raise ValueError("gain must be positive")
        return v


class HorizonSettings(_Strict):
    mode: Literal["shrinking", "receding"]
    length: Optional[float] = Field(default=None, gt=0)
    replan_period: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _length(self):
        if self.mode == "receding" and self.length is None:
            raise ValueError("receding horizon needs a length")
        if self.mode == "shrinking" and self.length is not None:
            raise ValueError("shrinking horizon ends at the run duration; drop length")
        return self


class ControllerSettings(_Strict):
    kind: Literal["mfpc", "heol"]
    channels: Dict[str, ChannelSettings]
    window_length: float = Field(gt=0)
    horizon: Optional[HorizonSettings] = None


class DisturbanceSettings(_Strict):
    target: Literal["F0"] = "F0"
    magnitude: float
    onset: float = Field(default=0.0, ge=0)


class Scenario(_Strict):
    name: str
    plant: Union[ReactorPlant, TankPlant] = Field(discriminator="kind")
    controller: ControllerSettings
    sim: SimSettings
    setpoints: Dict[str, List[Tuple[float, float]]]
    transition_time: Optional[float] = Field(default=None, gt=0)
    uncertainty: float = 0.0
    disturbance: Optional[DisturbanceSettings] = None

    @model_validator(mode="after")
    def _consistency(self):
        kind = self.plant.kind
        outputs = PLANT_OUTPUTS[kind]
        ctl = self.controller
        if set(ctl.channels) != set(outputs):
            raise ValueError(f"controller.channels must be exactly {list(outputs)} for the {kind} plant")
        for name, ch in ctl.channels.items():
            if ctl.kind == "mfpc" and ch.alpha is None:
                raise ValueError(f"controller.channels.{name}.alpha is required for mfpc")
            if ctl.kind == "heol" and ch.gain is None:
                raise ValueError(f"controller.channels.{name}.gain is required for heol")
            if ctl.kind == "heol" and ch.alpha is not None:
                raise ValueError(f"controller.channels.{name}.alpha is derived from the plant for heol")
        if ctl.kind == "mfpc" and ctl.horizon is None:
            raise ValueError("controller.horizon is required for mfpc")
        if ctl.kind == "mfpc":
            replan = ctl.horizon.replan_period or self.sim.dt_control
            if not _is_multiple(replan, self.sim.dt_control):
                raise ValueError("controller.horizon.replan_period must be a multiple of sim.dt_control")
            if ctl.horizon.mode == "receding" and not ctl.horizon.length > replan:
                raise ValueError("controller.horizon.length must exceed the replan period")
        if ctl.kind == "heol" and ctl.horizon is not None:
            raise ValueError("controller.horizon only applies to mfpc")
        if not _is_multiple(ctl.window_length, self.sim.dt_estimator):
            raise ValueError("controller.window_length must be a multiple of sim.dt_estimator")
        if set(self.setpoints) != set(outputs):
            raise ValueError(f"setpoints must be given for exactly {list(outputs)}")
        for name, steps in self.setpoints.items():
            times = [t for t, _ in steps]
            if not steps or times[0] != 0.0:
                raise ValueError(f"setpoints.{name} must start at time 0")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError(f"setpoints.{name} times must be increasing")
            if times[-1] > self.sim.duration:
                raise ValueError(f"setpoints.{name} times must lie within [0, duration]")
            if self.transition_time and any(b - a < self.transition_time for a, b in zip(times, times[1:])):
                raise ValueError(f"setpoints.{name} steps closer than transition_time")
        if kind == "reactor" and self.uncertainty != 0.0:
            raise ValueError("uncertainty only applies to the tank plant")
        if not abs(self.uncertainty) < 1:
            raise ValueError("uncertainty must satisfy |nabla| < 1")
        if kind == "tank" and self.disturbance is not None:
            raise ValueError("disturbance only applies to the reactor plant")
        if self.disturbance is not None and self.disturbance.onset > self.sim.duration:
            raise ValueError("disturbance.onset beyond duration")
        return self

    def to_dict(self):
        return self.model_dump(mode="json")

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _format_validation(err):
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"] if not str(x).startswith("function-after"))
        msg = e["msg"].removeprefix("Value error, ")
        lines.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(lines)


def scenario_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("scenario document must be a mapping")
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def parse_scenario(text, source="<string>"):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{source}:{where} {getattr(err, 'problem', err)}") from None
    return scenario_from_dict(data)


def load_scenario(path):
    """Load a scenario from a YAML file or a preset name."""
    if str(path) in PRESET_NAMES:
        return load_preset(str(path))
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    return parse_scenario(text, str(path))


def preset_text(name):
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}")
    return resources.files("ultralocal").joinpath("presets").joinpath(f"{name}.yaml").read_text()


def load_preset(name):
    return parse_scenario(preset_text(name), name)


def list_scenarios(directory=None):
    """Built-in presets followed by ``*.yaml`` files found in ``directory``.

    Returns ``(name, source, error)`` triples; ``error`` is None for valid
    scenarios and a message for files that fail to load.
    """
    out = [(name, "preset", None) for name in PRESET_NAMES]
    if directory is not None:
        for path in sorted(Path(directory).glob("*.y*ml")):
            try:
                sc = load_scenario(path)
                out.append((sc.name, str(path), None))
            except ConfigError as err:
                out.append((path.stem, str(path), str(err)))
    return out
