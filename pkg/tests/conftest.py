import json
import sys
from pathlib import Path

import numpy as np
import pytest

from nanodisk_rl.env import DEFAULT_BOUNDS, PRESETS, NanodiskEnv, SolverContext

ORACLES = Path(__file__).resolve().parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(ORACLES.read_text())


@pytest.fixture(scope="session")
def context():
    return SolverContext()


@pytest.fixture(scope="session")
def reduced_bounds():
    # L and D at 25 nm, NT / AT frozen at the red preset: 20 x 20 states
    return DEFAULT_BOUNDS.frozen_at(PRESETS["red"], keep=("l_nm", "d_nm")).with_step(25)


@pytest.fixture(scope="session")
def reduced_env(context, reduced_bounds):
    return NanodiskEnv("red", context, reduced_bounds)


@pytest.fixture(scope="session")
def full_env(context):
    return NanodiskEnv("red", context)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(results.items()):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
