"""Self-check suites behind ``nanodisk-rl validate``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import color, qnet
from ._tables import bundled_path
from .optics import LayerStack, Materials, WavelengthGrid, tmm_reflectance


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def sharma_pairs() -> np.ndarray:
    """The 34 CIEDE2000 reference pairs: columns pair, L1, a1, b1, L2, a2, b2, dE."""
    with bundled_path("ciede2000_pairs.txt").open("r", encoding="utf-8") as fh:
        return np.loadtxt(fh, comments="#")


def _guard(name: str, fn: Callable[[], Check]) -> Check:
    try:
        return fn()
    except Exception as exc:  # a broken fixture is a failed check, not a crash
        return Check(name, False, f"{type(exc).__name__}: {exc}")


def color_suite(cmf_path=None, illuminant_path=None, grid: Optional[WavelengthGrid] = None) -> list[Check]:
    grid = grid or WavelengthGrid()
    checks = []
    for row in sharma_pairs():
        pair = int(row[0])
        de = color.ciede2000(row[1:4], row[4:7])
        err = abs(de - row[7])
        checks.append(Check(f"ciede2000 pair {pair}", err <= 1e-4, f"dE={de:.4f} ref={row[7]:.4f}"))

    def tables():
        cmf = color.load_cmf(cmf_path) if cmf_path else color.bundled_cmf()
        ill = color.load_illuminant(illuminant_path) if illuminant_path else color.bundled_d65()
        return cmf, ill

    def reflector():
        cmf, ill = tables()
        wl = grid.values
        xyz = color.spectrum_to_xyz(color.Spectrum(wl, np.ones_like(wl)), cmf, ill)
        lab = color.xyz_to_lab(xyz, color.white_point(wl, cmf, ill))
        ok = abs(xyz.y - 100.0) < 1e-9 and abs(lab.l - 100.0) < 1e-9 and max(abs(lab.a), abs(lab.b)) < 1e-9
        return Check("perfect reflector -> Y=100, Lab=(100,0,0)", ok, f"Y={xyz.y:.12g} Lab={tuple(round(v, 9) for v in lab)}")

    def d65_white():
        cmf, ill = tables()
        w = color.white_point(grid.values, cmf, ill)
        # tabulated D65/2deg white is (95.047, 100, 108.883); grid sampling costs < 0.05
        ok = abs(w.x - 95.047) < 0.05 and abs(w.z - 108.883) < 0.05
        return Check("illuminant white point near D65", ok, f"XYZ=({w.x:.4f}, {w.y:.4f}, {w.z:.4f})")

    checks.append(_guard("cmf/illuminant tables", lambda: (tables(), Check("cmf/illuminant tables", True))[1]))
    checks.append(_guard("perfect reflector -> Y=100, Lab=(100,0,0)", reflector))
    checks.append(_guard("illuminant white point near D65", d65_white))
    return checks


def optics_suite(materials: Optional[Materials] = None, grid: Optional[WavelengthGrid] = None) -> list[Check]:
    grid = grid or WavelengthGrid()
    lam = 550.0
    bare = tmm_reflectance(LayerStack((), 4.0), lam)
    qw = tmm_reflectance(LayerStack(((2.0, lam / 8.0),), 4.0), lam)
    hw = tmm_reflectance(LayerStack(((1.7, lam / (2 * 1.7)),), 4.0), lam)
    checks = [
        Check("fresnel bare interface 1->4", abs(bare - 0.36) <= 1e-12, f"R={bare:.15f}"),
        Check("quarter-wave AR layer", qw < 1e-10, f"R={qw:.3e}"),
        Check("half-wave absentee layer", abs(hw - bare) <= 1e-9, f"R={hw:.15f}"),
    ]

    def tables():
        m = materials or Materials.bundled()
        lo, hi = grid.values[0], grid.values[-1]
        for t in (m.silicon, m.nitride):
            a, b = t.range_nm
            if lo < a or hi > b:
                return Check("material tables cover grid", False, f"{t.name} spans {a:g}-{b:g} nm")
        return Check("material tables cover grid", True, f"{lo:g}-{hi:g} nm")

    checks.append(_guard("material tables cover grid", tables))
    return checks


def finite_difference_gradient(params: qnet.NetworkParams, states, actions, targets, h: float = 1e-5):
    """Central-difference gradient of the batch loss, same layout as ``params.arrays()``."""
    arrays = [a.copy() for a in params.arrays()]
    out = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = qnet.batch_loss(params.with_arrays(arrays), states, actions, targets)
            arr[idx] = orig - h
            down = qnet.batch_loss(params.with_arrays(arrays), states, actions, targets)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Max element-wise ``|a - n| / max(|a|, |n|, floor)`` over all arrays."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradient_check(seed: int, hidden=(16,), activation: str = "relu", batch: int = 8) -> float:
    arch = qnet.NetworkArchitecture(hidden, activation)
    rng = np.random.default_rng(seed)
    params = qnet.init_params(arch, seed)
    # non-zero biases so every term of the gradient is exercised
    params = params.with_arrays(
        [a if a.ndim == 2 else rng.normal(0, 0.1, a.shape) for a in params.arrays()]
    )
    x = rng.uniform(0, 1, (batch, qnet.INPUT_DIM))
    a = rng.integers(0, qnet.OUTPUT_DIM, batch)
    y = rng.normal(0, 1, batch)
    grad = qnet.gradient(params, x, a, y)
    return relative_error(grad.arrays(), finite_difference_gradient(params, x, a, y))


def gradient_suite(seeds=range(20)) -> list[Check]:
    errs = [gradient_check(s) for s in seeds]
    worst = max(errs)
    return [Check("backprop vs central differences (4-16-9, 20 seeds)", worst < 1e-4, f"max relative error {worst:.3e}")]


SUITES = {"colors": color_suite, "optics": optics_suite, "gradients": gradient_suite}


def summarize(checks: list[Check]) -> tuple[int, int]:
    passed = sum(c.passed for c in checks)
    return passed, len(checks) - passed
