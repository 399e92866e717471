import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robusttoll.game import BasisSet, Game  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def game_x():
    return Game([[{0}, {1}], [{0}, {1}]], [[1.0], [1.0]], BasisSet.polynomial((1,), 2))


@pytest.fixture
def game_y():
    return Game([[{0}, {1}], [{0}, {1}]], [[1.0, 0.0], [0.0, 0.5]], BasisSet.affine(2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(RESULTS):
        ok, detail = RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
