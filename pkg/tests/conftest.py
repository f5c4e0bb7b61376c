import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from plapeig import build_mesh  # noqa: E402


@pytest.fixture(scope="session")
def unit_interval():
    return build_mesh(1, [0, 1], 64)


@pytest.fixture(scope="session")
def unit_square():
    return build_mesh(2, [[0, 1], [0, 1]], 16)


def smooth_g(x):
    return 1 + 0.5 * np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]) + 0.3 * x[:, 0]


def smooth_V(x):
    return 4 * x[:, 1] ** 2 + 2 * np.cos(2 * np.pi * x[:, 0])


def smooth_g1(x):
    return 1 + 0.5 * np.sin(np.pi * x[:, 0]) + 0.3 * x[:, 0]


def smooth_V1(x):
    return 4 * x[:, 0] ** 2 + 2 * np.cos(2 * np.pi * x[:, 0])


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
