"""Run configuration: one YAML file with named blocks, every key optional.

See ``configs/default.yaml`` in the repository for the documented defaults.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from . import color, qnet
from .agent import AgentConfig, EpsilonSchedule
from .env import Bounds, NanodiskEnv, ParamRange, RewardConfig, SolverContext, state_from_mapping, target_color
from .optics import Materials, MixingRule, WavelengthGrid, load_dispersion
from .search import DEFAULT_STATE_CAP

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "output_dir": "runs/latest",
    "target": "red",
    "environment": {
        "bounds": {
            "l_nm": [5, 500, 5],
            "d_nm": [10, 500, 5],
            "nt_nm": [5, 500, 5],
            "at_nm": [10, 200, 5],
        },
        "start": "random",
        "reward": {"offset": 200.0, "exponent": 3.0, "divisor": 10000.0},
    },
    "optics": {
        "silicon": None,
        "nitride": None,
        "mixing_rule": "volume-average",
        "grid_nm": [380, 780, 5],
        "cmf": None,
        "illuminant": None,
    },
    "agent": {
        "gamma": 0.95,
        "tau": 0.05,
        "batch_size": 32,
        "replay_capacity": 5000,
        "warmup": 200,
        "episodes": 18,
        "steps_per_episode": 500,
        "epsilon": {"start": 1.0, "min": 0.05, "decay": 0.9995},
        "network": {"hidden_layers": [64, 64], "activation": "relu", "output_scale": 16000.0, "output_offset": 0.0},
        "learning_rate": 0.1,
        "max_grad_norm": None,
    },
    "bruteforce": {"max_states": DEFAULT_STATE_CAP},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and isinstance(val, Mapping) and key not in ("start",):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def output_dir(self) -> Path:
        return self._path(self.raw["output_dir"])

    @property
    def bruteforce_cap(self) -> int:
        return int(self.raw["bruteforce"]["max_states"])

    def _path(self, p) -> Path:
        p = Path(os.path.expanduser(str(p)))
        return p if p.is_absolute() else self.base_dir / p

    def _table(self, key: str):
        p = self.raw["optics"][key]
        if p is None:
            return None
        path = self._path(p)
        if not path.is_file():
            raise FileNotFoundError(f"{key} file not found: {path}")
        return path

    def bounds(self) -> Bounds:
        spec = self.raw["environment"]["bounds"]
        try:
            return Bounds(**{k: ParamRange(*map(int, v)) for k, v in spec.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad environment.bounds: {exc}") from None

    def reward(self) -> RewardConfig:
        return RewardConfig(**self.raw["environment"]["reward"])

    def materials(self) -> Materials:
        si, sin = self._table("silicon"), self._table("nitride")
        bundled = Materials.bundled()
        return Materials(
            load_dispersion(si, "si") if si else bundled.silicon,
            load_dispersion(sin, "si3n4") if sin else bundled.nitride,
        )

    def context(self) -> SolverContext:
        opt = self.raw["optics"]
        cmf_path, ill_path = self._table("cmf"), self._table("illuminant")
        return SolverContext(
            materials=self.materials(),
            grid=WavelengthGrid(*map(float, opt["grid_nm"])),
            mixing_rule=MixingRule(opt["mixing_rule"]),
            cmf=color.load_cmf(cmf_path) if cmf_path else color.bundled_cmf(),
            illuminant=color.load_illuminant(ill_path) if ill_path else color.bundled_d65(),
        )

    def env(self) -> NanodiskEnv:
        return NanodiskEnv(target_color(self.raw["target"]), self.context(), self.bounds(), self.reward())

    def start_state(self):
        start = self.raw["environment"]["start"]
        if start in (None, "random"):
            return None
        if isinstance(start, Mapping):
            return self.bounds().validate(state_from_mapping(start))
        raise ConfigError("environment.start must be 'random' or a mapping of l_nm/d_nm/nt_nm/at_nm")

    def agent(self) -> AgentConfig:
        a = self.raw["agent"]
        eps = a["epsilon"]
        net = a["network"]
        return AgentConfig(
            gamma=float(a["gamma"]),
            tau=float(a["tau"]),
            batch_size=int(a["batch_size"]),
            replay_capacity=int(a["replay_capacity"]),
            warmup=int(a["warmup"]),
            schedule=EpsilonSchedule(float(eps["start"]), float(eps["min"]), float(eps["decay"])),
            episodes=int(a["episodes"]),
            steps_per_episode=int(a["steps_per_episode"]),
            architecture=qnet.NetworkArchitecture(
                tuple(net["hidden_layers"]), net["activation"],
                output_scale=float(net["output_scale"]), output_offset=float(net["output_offset"]),
            ),
            train=qnet.TrainConfig(
                float(a["learning_rate"]),
                None if a["max_grad_norm"] is None else float(a["max_grad_norm"]),
            ),
            start_state=self.start_state(),
        )


def load_config(path: Optional[os.PathLike] = None, overrides: Optional[Mapping] = None) -> RunConfig:
    """Read ``path`` (or use pure defaults) and apply ``overrides`` on top."""
    raw = copy.deepcopy(DEFAULTS)
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, Mapping):
            raise ConfigError("config file must contain a mapping")
        raw = _merge(raw, data)
        base = path.resolve().parent
    if overrides:
        raw = _merge(raw, overrides)
    return RunConfig(raw, base)
