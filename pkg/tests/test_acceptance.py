"""Acceptance gate: one test per criterion; a PASS/FAIL line each is printed in the terminal summary."""

import json
import statistics
import time

import numpy as np
import pytest

from nanodisk_rl import color, qnet, validate
from nanodisk_rl.agent import AgentConfig, Trainer, train_run
from nanodisk_rl.env import DEFAULT_BOUNDS, reward_from_delta_e, state_space_size
from nanodisk_rl.optics import LayerStack, tmm_reflectance
from nanodisk_rl.search import brute_force, random_search

RESULTS: dict[int, tuple[bool, str]] = {}
REDUCED = AgentConfig(episodes=30, steps_per_episode=100)


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


def test_1_ciede2000_reference_pairs():
    t0 = time.perf_counter()
    rows = validate.sharma_pairs()
    errs = [abs(color.ciede2000(r[1:4], r[4:7]) - r[7]) for r in rows]
    dt = time.perf_counter() - t0
    record(1, len(rows) == 34 and max(errs) <= 1e-4 and dt < 1.0,
           f"34 pairs, max |err| {max(errs):.2e} (tol 1e-4), {dt:.3f} s (< 1 s)")


def test_2_optics_analytics():
    t0 = time.perf_counter()
    lam = 550.0
    bare = tmm_reflectance(LayerStack((), 4.0), lam)
    qw = tmm_reflectance(LayerStack(((2.0, lam / 8.0),), 4.0), lam)
    hw = tmm_reflectance(LayerStack(((1.7, lam / 3.4),), 4.0), lam)
    dt = time.perf_counter() - t0
    ok = abs(bare - 0.36) <= 1e-12 and qw < 1e-10 and abs(hw - bare) <= 1e-9 and dt < 1.0
    record(2, ok, f"|R-0.36| {abs(bare - 0.36):.1e}, R_qw {qw:.1e}, |R_hw-R| {abs(hw - bare):.1e}, {dt:.3f} s")


def test_3_gradient_correctness():
    t0 = time.perf_counter()
    errs = [validate.gradient_check(s, hidden=(16,)) for s in range(20)]
    dt = time.perf_counter() - t0
    record(3, max(errs) < 1e-4 and dt < 10.0, f"4-16-9, 20 seeds, max rel err {max(errs):.2e}, {dt:.2f} s (< 10 s)")


def test_4_exact_formulas():
    rewards = [reward_from_delta_e(d) for d in (0.0, 100.0, 200.0)]
    main = qnet.init_params(qnet.NetworkArchitecture(), 1)
    target = qnet.init_params(qnet.NetworkArchitecture(), 2)
    soft_ok = all(
        all(np.array_equal(u, tau * m + (1 - tau) * t)
            for u, m, t in zip(qnet.soft_update(target, main, tau).arrays(), main.arrays(), target.arrays()))
        for tau in (0.0, 0.5, 1.0)
    )
    size = state_space_size(DEFAULT_BOUNDS)
    record(4, rewards == [800.0, 100.0, 0.0] and soft_ok and size == 36_498_924,
           f"rewards {rewards}, soft_update exact {soft_ok}, state count {size:,}")


@pytest.fixture(scope="module")
def reduced_optimum(reduced_env):
    return brute_force(reduced_env).best_delta_e


def test_5_small_instance_convergence(reduced_env, reduced_optimum):
    t0 = time.perf_counter()
    bests = [train_run(reduced_env, REDUCED, s).best_delta_e for s in range(10)]
    dt = time.perf_counter() - t0
    hits = sum(b <= reduced_optimum * 1.01 for b in bests)
    record(5, hits >= 8 and dt < 300, f"{hits}/10 seeds within 1% of optimum {reduced_optimum:.4f}, {dt:.1f} s (< 300 s)")


@pytest.mark.slow
def test_6_full_lattice_beats_random(full_env):
    t0 = time.perf_counter()
    agent = [Trainer(full_env, AgentConfig(), s).run().best_delta_e for s in range(3)]
    rand = [random_search(full_env, 9000, s).best_delta_e for s in range(3)]
    dt = time.perf_counter() - t0
    a, r = statistics.median(agent), statistics.median(rand)
    record(6, a <= r and dt < 1800,
           f"median best dE agent {a:.3f} vs random {r:.3f} "
           f"(agent {[round(x, 3) for x in agent]}, random {[round(x, 3) for x in rand]}), {dt:.1f} s")


def test_7_determinism(reduced_env):
    logs = [[json.dumps(r.to_dict(), sort_keys=True) for r in train_run(reduced_env, REDUCED, 4).records]
            for _ in range(2)]
    record(7, logs[0] == logs[1] and len(logs[0]) == 3000, f"two runs at seed 4, {len(logs[0])} records, identical")
