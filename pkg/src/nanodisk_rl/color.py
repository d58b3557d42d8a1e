"""Spectrum -> CIE XYZ -> CIELAB -> CIEDE2000.

Relative colorimetry throughout: tristimulus values are scaled so that a
perfect reflector under the chosen illuminant has ``Y = 100``, and that same
reflector is the Lab white point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from ._tables import Source, TableError, bundled_path, read_rows

__all__ = [
    "Spectrum",
    "CmfTable",
    "IlluminantSpectrum",
    "XyzColor",
    "LabColor",
    "load_cmf",
    "load_illuminant",
    "bundled_cmf",
    "bundled_d65",
    "spectrum_to_xyz",
    "white_point",
    "xyz_to_lab",
    "lab_to_xyz",
    "ciede2000",
    "srgb_to_lab",
    "lab_to_srgb",
]

# CIELAB piecewise cube root: linear below (6/29)^3.
_DELTA = 6.0 / 29.0


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_grid(wavelengths: np.ndarray, what: str) -> None:
    if wavelengths.ndim != 1 or wavelengths.size < 2:
        raise ValueError(f"{what}: need at least 2 samples")
    if np.any(np.diff(wavelengths) <= 0):
        raise ValueError(f"{what}: wavelengths must be strictly increasing")


@dataclass(frozen=True)
class Spectrum:
    wavelengths_nm: np.ndarray
    reflectance: np.ndarray

    def __post_init__(self):
        wl = _frozen(self.wavelengths_nm)
        r = _frozen(self.reflectance)
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "reflectance", r)
        _check_grid(wl, "spectrum")
        if r.shape != wl.shape:
            raise ValueError("spectrum: reflectance and wavelength lengths differ")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("spectrum: reflectance outside [0, 1]")
        if wl[0] > 400 or wl[-1] < 700:
            raise ValueError("spectrum: grid must cover 400-700 nm")


@dataclass(frozen=True)
class CmfTable:
    wavelengths_nm: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    zbar: np.ndarray

    def __post_init__(self):
        for name in ("wavelengths_nm", "xbar", "ybar", "zbar"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        _check_grid(self.wavelengths_nm, "cmf")
        n = self.wavelengths_nm.size
        if not (self.xbar.size == self.ybar.size == self.zbar.size == n):
            raise ValueError("cmf: column lengths differ")
        if min(self.xbar.min(), self.ybar.min(), self.zbar.min()) < 0:
            raise ValueError("cmf: negative matching-function value")

    def __len__(self) -> int:
        return self.wavelengths_nm.size


@dataclass(frozen=True)
class IlluminantSpectrum:
    wavelengths_nm: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "wavelengths_nm", _frozen(self.wavelengths_nm))
        object.__setattr__(self, "power", _frozen(self.power))
        _check_grid(self.wavelengths_nm, "illuminant")
        if self.power.shape != self.wavelengths_nm.shape:
            raise ValueError("illuminant: column lengths differ")
        if np.any(self.power < 0):
            raise ValueError("illuminant: negative power")


class XyzColor(NamedTuple):
    x: float
    y: float
    z: float


class LabColor(NamedTuple):
    l: float  # noqa: E741
    a: float
    b: float


def _non_negative(values: list[float]) -> str | None:
    if any(v < 0 for v in values[1:]):
        return "negative value"
    return None


def load_cmf(source: Source) -> CmfTable:
    """Read a 4-column ``wavelength, xbar, ybar, zbar`` table. No resampling."""
    rows = read_rows(source, 4, "cmf", check=_non_negative)
    return CmfTable(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])


def load_illuminant(source: Source) -> IlluminantSpectrum:
    rows = read_rows(source, 2, "illuminant", check=_non_negative)
    return IlluminantSpectrum(rows[:, 0], rows[:, 1])


@lru_cache(maxsize=None)
def bundled_cmf() -> CmfTable:
    """CIE 1931 2-degree observer, 360-830 nm at 1 nm."""
    with bundled_path("cie1931_2deg.csv").open("r", encoding="utf-8") as fh:
        return load_cmf(fh)


@lru_cache(maxsize=None)
def bundled_d65() -> IlluminantSpectrum:
    """CIE illuminant D65, 300-780 nm at 5 nm."""
    with bundled_path("d65.csv").open("r", encoding="utf-8") as fh:
        return load_illuminant(fh)


def _weights(wl: np.ndarray, cmf: CmfTable, illuminant: IlluminantSpectrum) -> np.ndarray:
    """Per-sample trapezoid weights times S*xbar, S*ybar, S*zbar, shape (3, n)."""
    lo, hi = wl[0], wl[-1]
    for what, grid in (("cmf", cmf.wavelengths_nm), ("illuminant", illuminant.wavelengths_nm)):
        if lo < grid[0] or hi > grid[-1]:
            raise ValueError(
                f"spectrum range {lo:g}-{hi:g} nm not contained in {what} range "
                f"{grid[0]:g}-{grid[-1]:g} nm"
            )
    s = np.interp(wl, illuminant.wavelengths_nm, illuminant.power)
    cmfs = np.stack(
        [np.interp(wl, cmf.wavelengths_nm, col) for col in (cmf.xbar, cmf.ybar, cmf.zbar)]
    )
    dl = np.diff(wl)
    trap = np.zeros_like(wl)
    trap[:-1] += dl / 2
    trap[1:] += dl / 2
    return cmfs * (s * trap)


def white_point(
    wavelengths_nm: Sequence[float], cmf: CmfTable, illuminant: IlluminantSpectrum
) -> XyzColor:
    """XYZ of the perfect reflector on the given grid (Y = 100)."""
    w = _weights(np.asarray(wavelengths_nm, dtype=np.float64), cmf, illuminant)
    xyz = w.sum(axis=1) * (100.0 / w[1].sum())
    return XyzColor(*map(float, xyz))


def spectrum_to_xyz(
    spectrum: Spectrum, cmf: CmfTable, illuminant: IlluminantSpectrum
) -> XyzColor:
    """Integrate ``R * S * cmf`` by the trapezoid rule on the spectrum grid.

    The CMF and illuminant are linearly interpolated onto the spectrum's own
    wavelengths, and the result is normalised so that ``R == 1`` gives
    ``Y == 100``.
    """
    w = _weights(spectrum.wavelengths_nm, cmf, illuminant)
    k = 100.0 / w[1].sum()
    xyz = k * (w @ spectrum.reflectance)
    return XyzColor(*map(float, xyz))


def _f(t: float) -> float:
    if t > _DELTA**3:
        return t ** (1.0 / 3.0)
    return t / (3 * _DELTA**2) + 4.0 / 29.0


def _f_inv(u: float) -> float:
    if u > _DELTA:
        return u**3
    return 3 * _DELTA**2 * (u - 4.0 / 29.0)


def xyz_to_lab(xyz: Sequence[float], white: Sequence[float]) -> LabColor:
    wx, wy, wz = white
    if min(wx, wy, wz) <= 0:
        raise ValueError("white point must have strictly positive components")
    x, y, z = map(float, xyz)
    fx, fy, fz = _f(x / wx), _f(y / wy), _f(z / wz)
    return LabColor(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def lab_to_xyz(lab: Sequence[float], white: Sequence[float]) -> XyzColor:
    """Analytic inverse of :func:`xyz_to_lab`."""
    wx, wy, wz = white
    if min(wx, wy, wz) <= 0:
        raise ValueError("white point must have strictly positive components")
    l, a, b = map(float, lab)  # noqa: E741
    fy = (l + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    return XyzColor(wx * _f_inv(fx), wy * _f_inv(fy), wz * _f_inv(fz))


def ciede2000(c1: Sequence[float], c2: Sequence[float]) -> float:
    """CIEDE2000 colour difference with kL = kC = kH = 1.

    Follows the implementation notes of Sharma, Wu and Dalal (2005),
    including their conventions for hue when a chroma is zero.
    """
    l1, a1, b1 = map(float, c1)
    l2, a2, b2 = map(float, c2)

    c_ab = (math.hypot(a1, b1) + math.hypot(a2, b2)) / 2.0
    c7 = c_ab**7
    g = 0.5 * (1.0 - math.sqrt(c7 / (c7 + 25.0**7)))
    a1p, a2p = (1.0 + g) * a1, (1.0 + g) * a2
    c1p, c2p = math.hypot(a1p, b1), math.hypot(a2p, b2)
    h1p = 0.0 if c1p == 0 else math.degrees(math.atan2(b1, a1p)) % 360.0
    h2p = 0.0 if c2p == 0 else math.degrees(math.atan2(b2, a2p)) % 360.0

    dlp = l2 - l1
    dcp = c2p - c1p
    cprod = c1p * c2p
    if cprod == 0:
        dhp = 0.0
    else:
        dhp = h2p - h1p
        if dhp > 180.0:
            dhp -= 360.0
        elif dhp < -180.0:
            dhp += 360.0
    dHp = 2.0 * math.sqrt(cprod) * math.sin(math.radians(dhp) / 2.0)

    lbar = (l1 + l2) / 2.0
    cbar = (c1p + c2p) / 2.0
    if cprod == 0:
        hbar = h1p + h2p
    elif abs(h1p - h2p) <= 180.0:
        hbar = (h1p + h2p) / 2.0
    elif h1p + h2p < 360.0:
        hbar = (h1p + h2p + 360.0) / 2.0
    else:
        hbar = (h1p + h2p - 360.0) / 2.0

    t = (
        1.0
        - 0.17 * math.cos(math.radians(hbar - 30.0))
        + 0.24 * math.cos(math.radians(2.0 * hbar))
        + 0.32 * math.cos(math.radians(3.0 * hbar + 6.0))
        - 0.20 * math.cos(math.radians(4.0 * hbar - 63.0))
    )
    dtheta = 30.0 * math.exp(-(((hbar - 275.0) / 25.0) ** 2))
    cbar7 = cbar**7
    rc = 2.0 * math.sqrt(cbar7 / (cbar7 + 25.0**7))
    sl = 1.0 + 0.015 * (lbar - 50.0) ** 2 / math.sqrt(20.0 + (lbar - 50.0) ** 2)
    sc = 1.0 + 0.045 * cbar
    sh = 1.0 + 0.015 * cbar * t
    rt = -math.sin(math.radians(2.0 * dtheta)) * rc

    tl, tc, th = dlp / sl, dcp / sc, dHp / sh
    return math.sqrt(max(0.0, tl * tl + tc * tc + th * th + rt * tc * th))


# sRGB (IEC 61966-2-1) linear RGB -> XYZ, D65 white, Y in [0, 1].
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
SRGB_WHITE = XyzColor(*(100.0 * _SRGB_TO_XYZ.sum(axis=1)))


def _decode(v: float) -> float:
    return v / 12.92 if v <= 0.04045 else ((v + 0.055) / 1.055) ** 2.4


def _encode(v: float) -> float:
    v = min(max(v, 0.0), 1.0)
    return 12.92 * v if v <= 0.0031308 else 1.055 * v ** (1 / 2.4) - 0.055


def srgb_to_lab(rgb: Sequence[float]) -> LabColor:
    """Gamma-encoded sRGB in [0, 1] to Lab relative to the sRGB D65 white."""
    lin = np.array([_decode(float(c)) for c in rgb])
    xyz = 100.0 * (_SRGB_TO_XYZ @ lin)
    return xyz_to_lab(xyz, SRGB_WHITE)


def lab_to_srgb(lab: Sequence[float]) -> tuple[float, float, float]:
    """Display helper; out-of-gamut components are clipped."""
    xyz = np.asarray(lab_to_xyz(lab, SRGB_WHITE)) / 100.0
    lin = np.linalg.solve(_SRGB_TO_XYZ, xyz)
    return tuple(_encode(float(c)) for c in lin)  # type: ignore[return-value]


def hex_color(rgb: Sequence[float]) -> str:
    return "#" + "".join(f"{round(255 * c):02x}" for c in rgb)


# Re-exported so callers can catch load failures without importing the helper.
DataLoadError = TableError
