"""Discrete design environment: lattice of geometries, 9 actions, colour reward."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Mapping, Optional, Union

import numpy as np

from . import color
from .color import LabColor
from .optics import Materials, MixingRule, WavelengthGrid, simulate_spectrum

PARAMS = ("l_nm", "d_nm", "nt_nm", "at_nm")


@dataclass(frozen=True, order=True)
class DesignState:
    """Disk gap L, disk diameter D, disk thickness NT, coating thickness AT (nm)."""

    l_nm: int
    d_nm: int
    nt_nm: int
    at_nm: int

    def as_dict(self) -> dict[str, int]:
        return {p: getattr(self, p) for p in PARAMS}

    def __str__(self) -> str:
        return f"L={self.l_nm} D={self.d_nm} NT={self.nt_nm} AT={self.at_nm}"


# Best geometries reported for the FDTD-simulated structure; used as presets.
PRESETS = {
    "red": DesignState(50, 190, 185, 200),
    "green": DesignState(90, 115, 160, 200),
    "blue": DesignState(80, 100, 80, 155),
}


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class ParamRange:
    """Lattice ``min, min + step, ...`` not exceeding ``max``."""

    min: int
    max: int
    step: int = 5

    def __post_init__(self):
        if self.step <= 0 or self.max < self.min:
            raise ValueError(f"invalid range {self}")

    @property
    def size(self) -> int:
        return (self.max - self.min) // self.step + 1

    @property
    def top(self) -> int:
        """Largest lattice value."""
        return self.min + (self.size - 1) * self.step

    def values(self) -> range:
        return range(self.min, self.top + 1, self.step)

    def __contains__(self, v) -> bool:
        return (
            float(v).is_integer()
            and self.min <= v <= self.top
            and (int(v) - self.min) % self.step == 0
        )


@dataclass(frozen=True)
class Bounds:
    l_nm: ParamRange = ParamRange(5, 500)
    d_nm: ParamRange = ParamRange(10, 500)
    nt_nm: ParamRange = ParamRange(5, 500)
    at_nm: ParamRange = ParamRange(10, 200)

    def axes(self) -> Iterator[tuple[str, ParamRange]]:
        for p in PARAMS:
            yield p, getattr(self, p)

    def validate(self, state: DesignState) -> DesignState:
        for p, rng in self.axes():
            v = getattr(state, p)
            if v not in rng:
                raise StateError(
                    f"{p}={v} is off-lattice (allowed {rng.min}..{rng.top} step {rng.step})"
                )
        return state

    def with_step(self, step: int) -> "Bounds":
        """Coarsen every non-frozen axis to ``step``."""
        return Bounds(
            **{p: r if r.size == 1 else replace(r, step=step) for p, r in self.axes()}
        )

    def frozen_at(self, state: DesignState, keep: tuple[str, ...]) -> "Bounds":
        """Freeze every axis not in ``keep`` to the value it has in ``state``."""
        out = {}
        for p, r in self.axes():
            v = getattr(state, p)
            out[p] = r if p in keep else ParamRange(v, v, r.step)
        return Bounds(**out)


DEFAULT_BOUNDS = Bounds()


def state_space_size(bounds: Bounds = DEFAULT_BOUNDS) -> int:
    """Product of per-axis step counts ``ceil((max - min) / step)``, 1 for a frozen axis.

    This is the published counting convention (99 x 98 x 99 x 38 on the
    default bounds). It is one short of the point count on an axis whose
    ends are both on the lattice; use :func:`lattice_size` for that.
    """
    return math.prod(max(1, -(-(r.max - r.min) // r.step)) for _, r in bounds.axes())


def lattice_size(bounds: Bounds = DEFAULT_BOUNDS) -> int:
    """Exact number of lattice points, i.e. what :func:`iter_states` yields."""
    return math.prod(r.size for _, r in bounds.axes())


def iter_states(bounds: Bounds) -> Iterator[DesignState]:
    """Every lattice state in lexicographic (L, D, NT, AT) order."""
    for l_nm in bounds.l_nm.values():
        for d_nm in bounds.d_nm.values():
            for nt_nm in bounds.nt_nm.values():
                for at_nm in bounds.at_nm.values():
                    yield DesignState(l_nm, d_nm, nt_nm, at_nm)


# (parameter, direction) per action id; 8 is the no-op.
ACTIONS: tuple[tuple[Optional[str], int], ...] = (
    ("l_nm", -1),
    ("l_nm", +1),
    ("d_nm", -1),
    ("d_nm", +1),
    ("nt_nm", -1),
    ("nt_nm", +1),
    ("at_nm", -1),
    ("at_nm", +1),
    (None, 0),
)
N_ACTIONS = len(ACTIONS)
NOOP = 8

ACTION_NAMES = (
    "decrease L",
    "increase L",
    "decrease D",
    "increase D",
    "decrease NT",
    "increase NT",
    "decrease AT",
    "increase AT",
    "do nothing",
)


def _move(state: DesignState, action: int, bounds: Bounds) -> tuple[DesignState, bool]:
    if not 0 <= action < N_ACTIONS:
        raise ValueError(f"action must be in 0..{N_ACTIONS - 1}, got {action}")
    param, sign = ACTIONS[action]
    if param is None:
        return state, False
    rng: ParamRange = getattr(bounds, param)
    old = getattr(state, param)
    new = old + sign * rng.step
    clamped = not rng.min <= new <= rng.top
    if clamped:
        new = min(max(new, rng.min), rng.top)
    return replace(state, **{param: new}), clamped


def apply_action(state: DesignState, action: int, bounds: Bounds = DEFAULT_BOUNDS) -> DesignState:
    """Move one parameter by one lattice step, clamping at the bounds."""
    return _move(state, action, bounds)[0]


def encode_state(state: DesignState, bounds: Bounds = DEFAULT_BOUNDS) -> np.ndarray:
    """Map each parameter affinely from its [min, top] range to [0, 1]."""
    out = np.empty(len(PARAMS), dtype=np.float64)
    for i, (p, r) in enumerate(bounds.axes()):
        span = r.top - r.min
        out[i] = 0.0 if span == 0 else (getattr(state, p) - r.min) / span
    return out


def reset(
    bounds: Bounds = DEFAULT_BOUNDS,
    *,
    state: Optional[DesignState] = None,
    rng: Union[np.random.Generator, int, None] = None,
) -> DesignState:
    """Episode start state: ``state`` if given (validated), else a uniform lattice draw.

    A random draw consumes exactly one ``integers`` call per parameter, in
    L, D, NT, AT order.
    """
    if state is not None:
        return bounds.validate(state)
    if rng is None:
        raise ValueError("reset needs either a fixed state or an rng/seed")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    vals = [r.min + r.step * int(gen.integers(r.size)) for _, r in bounds.axes()]
    return DesignState(*vals)


@dataclass(frozen=True)
class RewardConfig:
    offset: float = 200.0
    exponent: float = 3.0
    divisor: float = 10000.0


class RewardError(ArithmeticError):
    pass


def reward_from_delta_e(delta_e: float, cfg: RewardConfig = RewardConfig()) -> float:
    """``(offset - dE) ** exponent / divisor``.

    ``delta_e == offset`` gives 0; anything beyond is rejected rather than
    clamped, since it can only come from a broken colour computation.
    """
    if delta_e < 0:
        raise ValueError("colour difference cannot be negative")
    if delta_e > cfg.offset:
        raise RewardError(f"reward offset exceeded: delta_e={delta_e:g} > {cfg.offset:g}")
    return (cfg.offset - delta_e) ** cfg.exponent / cfg.divisor


@dataclass(frozen=True)
class TargetColor:
    name: str
    lab: LabColor

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.lab):
            raise ValueError("target Lab must be finite")
        object.__setattr__(self, "lab", LabColor(*map(float, self.lab)))


_PRIMARIES = {"red": (1.0, 0.0, 0.0), "green": (0.0, 1.0, 0.0), "blue": (0.0, 0.0, 1.0)}


def target_color(spec: Union[str, Mapping, tuple, list, TargetColor]) -> TargetColor:
    """Named sRGB primary (red/green/blue) or an explicit Lab triple."""
    if isinstance(spec, TargetColor):
        return spec
    if isinstance(spec, str):
        try:
            rgb = _PRIMARIES[spec.lower()]
        except KeyError:
            raise ValueError(f"unknown target colour {spec!r}; use red, green, blue or a Lab triple")
        return TargetColor(spec.lower(), color.srgb_to_lab(rgb))
    if isinstance(spec, Mapping):
        if "lab" in spec:
            return TargetColor(str(spec.get("name", "custom")), LabColor(*spec["lab"]))
        return target_color(spec["name"])
    return TargetColor("custom", LabColor(*spec))


@dataclass
class SolverContext:
    """Everything needed to turn a geometry into a Lab colour.

    Lab values are memoised per state. The cache is a plain dict, so a
    context should be driven from one thread at a time.
    """

    materials: Materials = field(default_factory=Materials.bundled)
    grid: WavelengthGrid = field(default_factory=WavelengthGrid)
    mixing_rule: MixingRule = MixingRule.VOLUME_AVERAGE
    cmf: color.CmfTable = field(default_factory=color.bundled_cmf)
    illuminant: color.IlluminantSpectrum = field(default_factory=color.bundled_d65)
    cache_enabled: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.mixing_rule = MixingRule(self.mixing_rule)
        self.white = color.white_point(self.grid.values, self.cmf, self.illuminant)

    def spectrum(self, state: DesignState) -> color.Spectrum:
        return simulate_spectrum(state, self.grid, self.materials, self.mixing_rule)

    def lab(self, state: DesignState) -> LabColor:
        if self.cache_enabled:
            hit = self._cache.get(state)
            if hit is not None:
                return hit
        xyz = color.spectrum_to_xyz(self.spectrum(state), self.cmf, self.illuminant)
        lab = color.xyz_to_lab(xyz, self.white)
        if self.cache_enabled:
            self._cache[state] = lab
        return lab

    @property
    def evaluations(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class Evaluation:
    lab: LabColor
    delta_e: float
    reward: float


@dataclass(frozen=True)
class StepResult:
    next_state: DesignState
    reward: float
    delta_e: float
    lab: LabColor
    clamped: bool


def evaluate(
    state: DesignState,
    target: TargetColor,
    context: SolverContext,
    reward_cfg: RewardConfig = RewardConfig(),
) -> Evaluation:
    lab = context.lab(state)
    de = color.ciede2000(lab, target.lab)
    return Evaluation(lab, de, reward_from_delta_e(de, reward_cfg))


def step(
    state: DesignState,
    action: int,
    target: TargetColor,
    context: SolverContext,
    bounds: Bounds = DEFAULT_BOUNDS,
    reward_cfg: RewardConfig = RewardConfig(),
) -> StepResult:
    nxt, clamped = _move(state, action, bounds)
    ev = evaluate(nxt, target, context, reward_cfg)
    return StepResult(nxt, ev.reward, ev.delta_e, ev.lab, clamped)


@dataclass
class NanodiskEnv:
    """Bundles target, solver, bounds and reward shaping behind one object."""

    target: TargetColor
    context: SolverContext = field(default_factory=SolverContext)
    bounds: Bounds = DEFAULT_BOUNDS
    reward_cfg: RewardConfig = RewardConfig()

    def __post_init__(self):
        self.target = target_color(self.target)

    def evaluate(self, state: DesignState) -> Evaluation:
        return evaluate(self.bounds.validate(state), self.target, self.context, self.reward_cfg)

    def step(self, state: DesignState, action: int) -> StepResult:
        return step(state, action, self.target, self.context, self.bounds, self.reward_cfg)

    def reset(self, *, state: Optional[DesignState] = None, rng=None) -> DesignState:
        return reset(self.bounds, state=state, rng=rng)

    def encode(self, state: DesignState) -> np.ndarray:
        return encode_state(state, self.bounds)

    @property
    def size(self) -> int:
        return lattice_size(self.bounds)


def state_from_mapping(values: Mapping[str, int]) -> DesignState:
    names = {f.name for f in fields(DesignState)}
    unknown = set(values) - names
    if unknown:
        raise StateError(f"unknown state fields: {sorted(unknown)}")
    return DesignState(**{k: int(v) if float(v).is_integer() else v for k, v in values.items()})
