"""Thin-film surrogate for the nanodisk reflector.

The disk array is homogenised into a single effective layer and the stack
(effective disks / Si3N4 / Si substrate, in air) is solved with the
normal-incidence characteristic-matrix method. Complex indices follow the
``n - i*k`` convention (``k >= 0`` means absorption).
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np

from ._tables import Source, bundled_path, read_rows
from .color import Spectrum

if TYPE_CHECKING:
    from .env import DesignState

AIR = 1.0 + 0.0j


@dataclass(frozen=True)
class MaterialTable:
    name: str
    wavelengths_nm: np.ndarray
    n: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        for attr in ("wavelengths_nm", "n", "k"):
            arr = np.array(getattr(self, attr), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if not (self.wavelengths_nm.shape == self.n.shape == self.k.shape):
            raise ValueError(f"{self.name}: column lengths differ")
        if self.wavelengths_nm.size < 2 or np.any(np.diff(self.wavelengths_nm) <= 0):
            raise ValueError(f"{self.name}: non-monotone wavelength")
        if np.any(self.n <= 0) or np.any(self.k < 0):
            raise ValueError(f"{self.name}: non-physical index")

    @property
    def range_nm(self) -> tuple[float, float]:
        return float(self.wavelengths_nm[0]), float(self.wavelengths_nm[-1])


def _physical(values: list[float]) -> Optional[str]:
    if values[1] <= 0 or values[2] < 0:
        return "non-physical index"
    return None


def load_dispersion(source: Source, name: str) -> MaterialTable:
    """Read a 3-column ``wavelength_nm, n, k`` table."""
    rows = read_rows(source, 3, name, check=_physical)
    return MaterialTable(name, rows[:, 0], rows[:, 1], rows[:, 2])


def load_material(name: str, directory: Union[str, os.PathLike, None] = None) -> MaterialTable:
    """Load ``materials/<name>.nk`` from ``directory`` (default: bundled data)."""
    if directory is None:
        return _bundled_material(name)
    path = Path(directory) / f"{name}.nk"
    if not path.is_file():
        raise FileNotFoundError(f"material file not found: {path}")
    return load_dispersion(path, name)


@lru_cache(maxsize=None)
def _bundled_material(name: str) -> MaterialTable:
    res = bundled_path("materials", f"{name}.nk")
    with res.open("r", encoding="utf-8") as fh:
        return load_dispersion(fh, name)


def refractive_index(table: MaterialTable, lambda_nm):
    """Linearly interpolated ``n - i*k``; scalar or array input, no extrapolation."""
    lam = np.asarray(lambda_nm, dtype=np.float64)
    lo, hi = table.range_nm
    if np.any(lam < lo) or np.any(lam > hi):
        raise ValueError(f"{table.name}: wavelength outside tabulated range {lo:g}-{hi:g} nm")
    n = np.interp(lam, table.wavelengths_nm, table.n)
    k = np.interp(lam, table.wavelengths_nm, table.k)
    out = n - 1j * k
    return complex(out) if out.ndim == 0 else out


def fill_fraction(d_nm: float, l_nm: float) -> float:
    """Area fraction of disks of diameter D on a square lattice with gap L."""
    if d_nm <= 0:
        raise ValueError("disk diameter must be positive")
    if l_nm < 0:
        raise ValueError("disk gap must be non-negative")
    return math.pi * d_nm**2 / (4.0 * (d_nm + l_nm) ** 2)


class MixingRule(str, enum.Enum):
    VOLUME_AVERAGE = "volume-average"
    MAXWELL_GARNETT = "maxwell-garnett"


@dataclass(frozen=True)
class EffectiveLayerModel:
    fill_fraction: float
    mixing_rule: MixingRule = MixingRule.VOLUME_AVERAGE

    def __post_init__(self):
        if not 0.0 <= self.fill_fraction <= 1.0:
            raise ValueError("fill fraction must lie in [0, 1]")
        object.__setattr__(self, "mixing_rule", MixingRule(self.mixing_rule))

    def index(self, n_inclusion, n_host):
        return effective_index(n_inclusion, n_host, self.fill_fraction, self.mixing_rule)


def _index_from_permittivity(eps):
    n = np.sqrt(np.asarray(eps, dtype=np.complex128))
    # principal root has Re >= 0; pick the branch with Im <= 0 (n - ik, k >= 0)
    n = np.where(n.imag > 0, np.conj(n), n)
    return n


def effective_index(n_inclusion, n_host, f: float, rule=MixingRule.VOLUME_AVERAGE):
    """Homogenised index of inclusions (fraction ``f``) in a host.

    Works element-wise on arrays. ``f == 0`` and ``f == 1`` return the host
    and inclusion indices unchanged.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError("fill fraction must lie in [0, 1]")
    rule = MixingRule(rule)
    n_inc = np.asarray(n_inclusion, dtype=np.complex128)
    n_h = np.asarray(n_host, dtype=np.complex128)
    if f == 0.0:
        out = np.broadcast_to(n_h, np.broadcast(n_inc, n_h).shape).copy()
    elif f == 1.0:
        out = np.broadcast_to(n_inc, np.broadcast(n_inc, n_h).shape).copy()
    else:
        e_i, e_h = n_inc**2, n_h**2
        if rule is MixingRule.VOLUME_AVERAGE:
            eps = f * e_i + (1.0 - f) * e_h
        else:
            eps = e_h * (e_i + 2 * e_h + 2 * f * (e_i - e_h)) / (e_i + 2 * e_h - f * (e_i - e_h))
        out = _index_from_permittivity(eps)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LayerStack:
    """Interior layers ordered from the incidence side to the substrate."""

    layers: tuple[tuple[complex, float], ...]
    substrate: complex
    ambient: complex = AIR

    def __post_init__(self):
        layers = tuple((complex(n), float(d)) for n, d in self.layers)
        if any(d <= 0 for _, d in layers):
            raise ValueError("layer thicknesses must be positive")
        object.__setattr__(self, "layers", layers)


def _reflectance(indices, thicknesses, ambient, substrate, lam) -> np.ndarray:
    """Vectorised normal-incidence reflectance.

    ``indices`` is ``(n_layers, n_lambda)``, ``thicknesses`` ``(n_layers,)``,
    ``substrate`` and ``lam`` ``(n_lambda,)``.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValueError("wavelength must be positive")
    m11 = np.ones(lam.shape, dtype=np.complex128)
    m12 = np.zeros(lam.shape, dtype=np.complex128)
    m21 = np.zeros(lam.shape, dtype=np.complex128)
    m22 = np.ones(lam.shape, dtype=np.complex128)
    for n, d in zip(indices, thicknesses):
        delta = 2.0 * np.pi * n * d / lam
        c, s = np.cos(delta), np.sin(delta)
        a11, a12, a21, a22 = c, 1j * s / n, 1j * n * s, c
        m11, m12, m21, m22 = (
            m11 * a11 + m12 * a21,
            m11 * a12 + m12 * a22,
            m21 * a11 + m22 * a21,
            m21 * a12 + m22 * a22,
        )
    b = m11 + m12 * substrate
    c = m21 + m22 * substrate
    r = (ambient * b - c) / (ambient * b + c)
    return np.clip(np.abs(r) ** 2, 0.0, 1.0)


def tmm_reflectance(stack: LayerStack, lambda_nm: float) -> float:
    """Reflectance of ``stack`` at normal incidence (either polarisation)."""
    if lambda_nm <= 0:
        raise ValueError("wavelength must be positive")
    lam = np.array([lambda_nm], dtype=np.float64)
    idx = np.array([[n] for n, _ in stack.layers], dtype=np.complex128).reshape(-1, 1)
    thick = np.array([d for _, d in stack.layers], dtype=np.float64)
    sub = np.array([stack.substrate], dtype=np.complex128)
    return float(_reflectance(idx, thick, complex(stack.ambient), sub, lam)[0])


@dataclass(frozen=True)
class Materials:
    """Disk/substrate material and antireflective-coating material."""

    silicon: MaterialTable
    nitride: MaterialTable

    @classmethod
    def bundled(cls) -> "Materials":
        return cls(load_material("si"), load_material("si3n4"))


@dataclass(frozen=True)
class WavelengthGrid:
    start_nm: float = 380.0
    stop_nm: float = 780.0
    step_nm: float = 5.0
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        count = int(round((self.stop_nm - self.start_nm) / self.step_nm)) + 1
        if count < 2:
            raise ValueError("wavelength grid needs at least 2 samples")
        vals = self.start_nm + self.step_nm * np.arange(count, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def simulate_spectrum(
    state: "DesignState",
    grid: Union[WavelengthGrid, Sequence[float]],
    materials: Materials,
    rule: MixingRule = MixingRule.VOLUME_AVERAGE,
) -> Spectrum:
    """Reflection spectrum of Si disks (in air) / Si3N4 / Si for ``state``."""
    lam = grid.values if isinstance(grid, WavelengthGrid) else np.asarray(grid, dtype=np.float64)
    n_si = refractive_index(materials.silicon, lam)
    n_sin = refractive_index(materials.nitride, lam)
    model = EffectiveLayerModel(fill_fraction(state.d_nm, state.l_nm), rule)
    n_disk = model.index(n_si, AIR)
    indices = np.stack([n_disk, n_sin])
    thick = np.array([state.nt_nm, state.at_nm], dtype=np.float64)
    return Spectrum(lam, _reflectance(indices, thick, AIR, n_si, lam))
