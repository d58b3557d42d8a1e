"""Exhaustive and random-sampling baselines over the design lattice."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .color import LabColor
from .env import DesignState, NanodiskEnv, iter_states, lattice_size

DEFAULT_STATE_CAP = 1_000_000


class LatticeTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SearchResult:
    best_state: DesignState
    best_delta_e: float
    best_lab: LabColor
    best_reward: float
    evaluated: int


def brute_force(env: NanodiskEnv, cap: int = DEFAULT_STATE_CAP) -> SearchResult:
    """Evaluate every lattice state; ties keep the first in lexicographic order."""
    size = lattice_size(env.bounds)
    if size > cap:
        raise LatticeTooLarge(
            f"lattice has {size:,} states, above the cap of {cap:,}; use a coarser step"
        )
    best: Optional[tuple] = None
    for s in iter_states(env.bounds):
        ev = env.evaluate(s)
        if best is None or ev.delta_e < best[1].delta_e:
            best = (s, ev)
    s, ev = best
    return SearchResult(s, ev.delta_e, ev.lab, ev.reward, size)


def random_search(env: NanodiskEnv, n: int, seed: int) -> SearchResult:
    """Best of ``n`` uniform lattice draws (with replacement)."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n):
        s = env.reset(rng=rng)
        ev = env.evaluate(s)
        if best is None or ev.delta_e < best[1].delta_e:
            best = (s, ev)
    s, ev = best
    return SearchResult(s, ev.delta_e, ev.lab, ev.reward, n)
