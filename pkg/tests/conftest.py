import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from frictorq.model import load_fixture  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def pendulum():
    return load_fixture("pendulum2")


@pytest.fixture(scope="session")
def arm():
    return load_fixture("arm4")


@pytest.fixture(scope="session")
def biped():
    return load_fixture("biped")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call":
                continue
            for key, value in rep.user_properties:
                if key == "criterion":
                    lines.append((value[0], outcome, value[1], value[2]))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, title, detail in sorted(lines):
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {mark}  {title}: {detail}")
