"""Experiment configuration: YAML file <-> nested dataclasses.

An empty file yields the reference scenario (12 cells over 387 m x 552 m,
300 Mb/s links, T_I = 10 s).  Unknown keys and invalid values raise
:class:`ConfigError` with the dotted path of the offending field.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .mobility import DEFAULT_SPEED, CellGrid
from .qnet import DETERMINISTIC, ProcessingProfile, QueueNetworkConfig, DEFAULT_INSTRUCTIONS
from .signaling import MessageType, ProcedureTiming
from .stochastic import DistributionSpec, ParameterError
from .traffic import ApplicationMix, CallParams, LinkProfile, TrafficParams, VideoParams, WebParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    user_counts: tuple = tuple(range(100_000, 1_300_001, 100_000))
    instances: tuple = (1, 2, 3)
    budget_s: float = 1e-3
    window_s: float = 5.0

    def __post_init__(self):
        if not self.user_counts:
            raise ParameterError("user_counts must be nonempty")
        if any(u <= 0 for u in self.user_counts):
            raise ParameterError("user_counts must be positive")
        if not self.instances or any(int(m) != m or m < 1 for m in self.instances):
            raise ParameterError("instances must be integers >= 1")
        if not self.budget_s > 0:
            raise ParameterError("budget_s must be positive")
        if not self.window_s > 0:
            raise ParameterError("window_s must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1
    num_users: int = 2000
    sim_duration_s: float = 1e4
    timer_s: float = 10.0
    timer_sweep_s: tuple = (1.0, 5.0, 10.0, 20.0, 40.0)
    mix: ApplicationMix = field(default_factory=ApplicationMix)
    link: LinkProfile = field(default_factory=LinkProfile)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    grid: CellGrid = field(default_factory=CellGrid)
    speed: DistributionSpec = DEFAULT_SPEED
    timing: ProcedureTiming = field(default_factory=ProcedureTiming)
    qnet: QueueNetworkConfig = field(default_factory=QueueNetworkConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    mc_sessions: int = 200_000
    output_dir: str = "out"

    def __post_init__(self):
        if self.num_users < 1:
            raise ParameterError("num_users must be >= 1")
        if not self.sim_duration_s > 0:
            raise ParameterError("sim_duration_s must be positive")
        if not self.timer_s >= 0:
            raise ParameterError("timer_s must be nonnegative")
        if not self.timer_sweep_s or any(not t >= 0 for t in self.timer_sweep_s):
            raise ParameterError("timer_sweep_s must be a nonempty list of nonnegative values")
        if self.mc_sessions < 1000:
            raise ParameterError("mc_sessions must be at least 1000")
        if self.speed.support[0] < 0:
            raise ParameterError("speed law must be nonnegative")


# -- to plain data ---------------------------------------------------------------

def to_dict(obj) -> Any:
    if isinstance(obj, DistributionSpec):
        return obj.to_dict()
    if isinstance(obj, ProcessingProfile):
        return {"cpu_capacity": obj.cpu_capacity,
                "instructions": {MessageType(k).name: float(v) for k, v in obj.instructions.items()}}
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [to_dict(v) for v in obj]
    return obj


def dump(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


# -- from plain data -------------------------------------------------------------

_NESTED = {
    ExperimentConfig: {"mix": ApplicationMix, "link": LinkProfile, "traffic": TrafficParams,
                       "grid": CellGrid, "timing": ProcedureTiming, "qnet": QueueNetworkConfig,
                       "sweep": SweepConfig},
    TrafficParams: {"web": WebParams, "video": VideoParams, "call": CallParams},
}


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{_join(path, unknown[0])}: unknown field")
    defaults = cls()
    kwargs = {}
    for name, value in data.items():
        here = _join(path, name)
        default = getattr(defaults, name)
        try:
            kwargs[name] = _convert(cls, name, default, value, here)
        except ConfigError:
            raise
        except (ParameterError, TypeError, ValueError) as exc:
            raise ConfigError(f"{here}: {exc}") from None
    try:
        return cls(**kwargs)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def _convert(cls, name, default, value, here):
    sub = _NESTED.get(cls, {}).get(name)
    if sub is not None:
        return _build(sub, value, here)
    if isinstance(default, DistributionSpec):
        if not isinstance(value, dict):
            raise ConfigError(f"{here}: expected a distribution mapping with a 'kind'")
        return DistributionSpec.from_dict(value)
    if isinstance(default, ProcessingProfile):
        return _profile(value, here)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            value = [value]
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int):
        if isinstance(value, float) and value != int(value):
            raise ConfigError(f"{here}: expected an integer, got {value}")
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value if default is None else type(default)(value)


def _profile(value, here) -> ProcessingProfile:
    if not isinstance(value, dict):
        raise ConfigError(f"{here}: expected a mapping")
    unknown = set(value) - {"cpu_capacity", "instructions"}
    if unknown:
        raise ConfigError(f"{_join(here, sorted(unknown)[0])}: unknown field")
    instr = {k: v for k, v in DEFAULT_INSTRUCTIONS.items()}
    for k, v in (value.get("instructions") or {}).items():
        try:
            instr[MessageType[k]] = float(v)
        except KeyError:
            raise ConfigError(f"{here}.instructions.{k}: unknown message type") from None
    cap = float(value.get("cpu_capacity", ProcessingProfile().cpu_capacity))
    try:
        return ProcessingProfile(instr, cap)
    except ParameterError as exc:
        raise ConfigError(f"{here}: {exc}") from None


def _join(path, name):
    return f"{path}.{name}" if path else name


def from_dict(data) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return from_dict(data)


__all__ = ["ConfigError", "ExperimentConfig", "SweepConfig", "dump", "from_dict", "load", "to_dict",
           "DETERMINISTIC"]
