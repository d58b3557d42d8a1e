import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanodisk_rl import color
from nanodisk_rl.env import (
    ACTIONS,
    N_ACTIONS,
    NOOP,
    DEFAULT_BOUNDS,
    PRESETS,
    Bounds,
    DesignState,
    NanodiskEnv,
    ParamRange,
    RewardConfig,
    RewardError,
    SolverContext,
    StateError,
    apply_action,
    encode_state,
    iter_states,
    lattice_size,
    reset,
    reward_from_delta_e,
    state_space_size,
    step,
    target_color,
)

lattice_state = st.builds(
    DesignState,
    st.integers(1, 100).map(lambda i: 5 * i),
    st.integers(2, 100).map(lambda i: 5 * i),
    st.integers(1, 100).map(lambda i: 5 * i),
    st.integers(2, 40).map(lambda i: 5 * i),
)


# -- lattice -----------------------------------------------------------

def test_state_space_size_default_bounds():
    assert state_space_size(DEFAULT_BOUNDS) == 36_498_924 == 99 * 98 * 99 * 38


def test_state_space_size_frozen_axis():
    b = dataclasses.replace(DEFAULT_BOUNDS, at_nm=ParamRange(100, 100))
    assert state_space_size(b) == 99 * 98 * 99


def test_state_space_size_coarse(reduced_bounds):
    assert state_space_size(reduced_bounds) == 400
    assert lattice_size(reduced_bounds) == 400 == len(list(iter_states(reduced_bounds)))


def test_lattice_size_counts_points():
    assert lattice_size(DEFAULT_BOUNDS) == 100 * 99 * 100 * 39


def test_default_bounds():
    b = DEFAULT_BOUNDS
    assert (b.l_nm.min, b.l_nm.top) == (5, 500)
    assert (b.d_nm.min, b.d_nm.top) == (10, 500)
    assert (b.nt_nm.min, b.nt_nm.top) == (5, 500)
    assert (b.at_nm.min, b.at_nm.top) == (10, 200)


def test_off_lattice_state_rejected():
    with pytest.raises(StateError, match="off-lattice"):
        DEFAULT_BOUNDS.validate(DesignState(52, 190, 185, 200))
    with pytest.raises(StateError):
        DEFAULT_BOUNDS.validate(DesignState(50, 190, 185, 205))


# -- actions -----------------------------------------------------------

def test_nine_actions_one_noop():
    assert N_ACTIONS == len(ACTIONS) == 9
    assert ACTIONS[NOOP] == (None, 0)
    moves = {ACTIONS[i] for i in range(8)}
    assert moves == {(p, d) for p in ("l_nm", "d_nm", "nt_nm", "at_nm") for d in (-1, 1)}
    # even ids decrease, odd ids increase, in L, D, NT, AT order
    assert [ACTIONS[i][1] for i in range(8)] == [-1, 1] * 4
    assert [ACTIONS[i][0] for i in range(0, 8, 2)] == ["l_nm", "d_nm", "nt_nm", "at_nm"]


def test_min_clamp():
    s = DesignState(5, 190, 185, 200)
    assert apply_action(s, 0) == s


def test_max_clamp():
    s = apply_action(DesignState(495, 190, 185, 200), 1)
    assert s.l_nm == 500
    assert apply_action(s, 1).l_nm == 500


@given(lattice_state)
def test_noop_keeps_state(s):
    assert apply_action(s, NOOP) == s


@given(lattice_state, st.integers(0, 8))
def test_action_changes_one_field_and_stays_on_lattice(s, a):
    nxt = apply_action(s, a)
    DEFAULT_BOUNDS.validate(nxt)
    diffs = [abs(getattr(nxt, f) - getattr(s, f)) for f in ("l_nm", "d_nm", "nt_nm", "at_nm")]
    assert sum(d > 0 for d in diffs) <= 1 and max(diffs) in (0, 5)


def test_all_actions_from_all_coarse_states_stay_on_lattice():
    coarse = DEFAULT_BOUNDS.with_step(55)
    for s in iter_states(coarse):
        for a in range(N_ACTIONS):
            DEFAULT_BOUNDS.validate(apply_action(s, a))
            coarse.validate(apply_action(s, a, coarse))


@given(lattice_state, st.sampled_from([(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4), (6, 7), (7, 6)]))
def test_opposite_actions_are_inverse_away_from_bounds(s, pair):
    a, b = pair
    once = apply_action(s, a)
    if once == s:
        return  # clamped
    back = apply_action(once, b)
    assert back == s


# -- encoding ----------------------------------------------------------

def test_encoding_endpoints():
    lo = DesignState(5, 10, 5, 10)
    hi = DesignState(500, 500, 500, 200)
    assert np.array_equal(encode_state(lo), np.zeros(4))
    assert np.array_equal(encode_state(hi), np.ones(4))


def test_encoding_affine():
    f = encode_state(DesignState(250, 10, 5, 10))
    assert f[0] == pytest.approx((250 - 5) / (500 - 5), abs=1e-15)
    assert round(f[0], 6) == 0.494949


def test_frozen_axis_encodes_to_zero(reduced_bounds):
    f = encode_state(PRESETS["red"], reduced_bounds)
    assert f[2] == 0.0 and f[3] == 0.0


# -- reset -------------------------------------------------------------

def test_fixed_reset_returns_preset():
    assert reset(state=DesignState(50, 190, 185, 200)) == DesignState(50, 190, 185, 200)


def test_fixed_reset_off_lattice():
    with pytest.raises(StateError):
        reset(state=DesignState(52, 190, 185, 200))


def test_random_reset_deterministic():
    assert reset(rng=7) == reset(rng=7)
    a = [reset(rng=g) for g in [np.random.default_rng(3)] * 5]
    b = [reset(rng=g) for g in [np.random.default_rng(3)] * 5]
    assert a == b


def test_random_reset_on_lattice():
    g = np.random.default_rng(0)
    seen = np.array([dataclasses.astuple(reset(rng=g)) for _ in range(10_000)])
    assert np.all(seen % 5 == 0)
    assert seen[:, 0].min() >= 5 and seen[:, 0].max() <= 500
    assert seen[:, 1].min() >= 10 and seen[:, 3].max() <= 200
    # both ends of every axis are reachable
    assert seen[:, 3].min() == 10 and seen[:, 3].max() == 200


def test_reset_needs_state_or_rng():
    with pytest.raises(ValueError):
        reset()


# -- reward ------------------------------------------------------------

def test_reward_examples():
    assert reward_from_delta_e(0) == 800
    assert reward_from_delta_e(100) == 100
    assert reward_from_delta_e(200) == 0


def test_reward_offset_exceeded():
    with pytest.raises(RewardError, match="reward offset exceeded"):
        reward_from_delta_e(200.5)


def test_reward_custom_config():
    assert reward_from_delta_e(10, RewardConfig(offset=20, exponent=2, divisor=4)) == 25


@given(st.floats(0, 199.999), st.floats(0, 199.999))
def test_reward_strictly_decreasing(d1, d2):
    if d1 + 1e-9 < d2:  # closer than that the cube rounds to the same double
        assert reward_from_delta_e(d1) > reward_from_delta_e(d2)


# -- targets -----------------------------------------------------------

def test_named_targets_are_srgb_primaries(frozen):
    for name, ref in frozen["srgb_primaries_lab"].items():
        t = target_color(name)
        assert t.name == name
        assert np.allclose(tuple(t.lab), ref, atol=0.05)
    red = target_color("red").lab
    assert (round(red.l, 2), round(red.a, 2), round(red.b, 2)) == (53.24, 80.09, 67.20)


def test_explicit_lab_target():
    t = target_color([50, 10, -10])
    assert tuple(t.lab) == (50, 10, -10)
    assert target_color({"name": "mine", "lab": [1, 2, 3]}).name == "mine"
    with pytest.raises(ValueError):
        target_color("purple")
    with pytest.raises(ValueError):
        target_color([50, float("nan"), 0])


# -- evaluate / step ---------------------------------------------------

def test_evaluate_matches_independent_pipeline(context, frozen):
    for case in frozen["pipeline"]:
        lab = context.lab(DesignState(*case["state"]))
        assert np.allclose(tuple(lab), case["lab"], atol=0.01)
        for name, ref_lab in frozen["srgb_primaries_lab"].items():
            de = color.ciede2000(lab, ref_lab)
            assert de == pytest.approx(case["delta_e"][name], abs=0.01)


def test_red_preset_evaluates(full_env):
    ev = full_env.evaluate(PRESETS["red"])
    assert ev.reward == reward_from_delta_e(ev.delta_e)
    assert 0 < ev.delta_e < 200


def test_step_clamped_flag(full_env):
    s = DesignState(500, 190, 185, 200)
    assert full_env.step(s, 1).clamped
    assert not full_env.step(s, 0).clamped


def test_noop_steps_identical(full_env):
    r1 = full_env.step(PRESETS["green"], NOOP)
    r2 = full_env.step(r1.next_state, NOOP)
    r3 = full_env.step(r2.next_state, NOOP)
    assert r2 == r3 and r1 == r2


def test_cache_does_not_change_results():
    hot = SolverContext()
    cold = SolverContext(cache_enabled=False)
    t = target_color("blue")
    for s in (PRESETS["blue"], DesignState(300, 20, 15, 60)):
        a = step(s, 3, t, hot)
        b = step(s, 3, t, hot)
        c = step(s, 3, t, cold)
        assert a == b == c
    assert cold.evaluations == 0 and hot.evaluations == 2


def test_rewards_bounded_over_coarse_sweep():
    # every state on a 25 nm lattice, all three targets
    ctx = SolverContext()
    coarse = DEFAULT_BOUNDS.with_step(25)
    envs = [NanodiskEnv(t, ctx, coarse) for t in ("red", "green", "blue")]
    lo, hi = np.inf, -np.inf
    for s in iter_states(coarse):
        for env in envs:
            ev = env.evaluate(s)
            lo, hi = min(lo, ev.delta_e), max(hi, ev.delta_e)
            assert 0 < ev.reward <= 800
    print(f"delta_e over {lattice_size(coarse)} states x 3 targets: {lo:.3f} .. {hi:.3f}")
    assert hi < 200


def test_env_size_and_bounds_type(full_env, reduced_env):
    assert full_env.size == lattice_size(DEFAULT_BOUNDS)
    assert reduced_env.size == 400
    assert isinstance(reduced_env.bounds, Bounds)
