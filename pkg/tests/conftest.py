import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from privfunnel.probcore import JointDist

FIXTURES = Path(__file__).parent / "fixtures"


@st.composite
def joints(draw, nx=(2, 3), ny=(2, 4), floor=0.02):
    """Random joint laws with every marginal entry bounded away from zero."""
    a = draw(st.integers(*nx))
    b = draw(st.integers(*ny))
    seed = draw(st.integers(0, 2**32 - 1))
    m = np.random.default_rng(seed).dirichlet(np.ones(a * b)).reshape(a, b)
    m = (1 - floor) * m + floor / m.size
    return JointDist(m / m.sum())


@pytest.fixture(scope="session")
def oracle_fixtures():
    return json.loads((FIXTURES / "oracle.json").read_text())


def find_fixture(records, name, criterion, eps):
    for r in records:
        if r["name"] == name and r["criterion"] == criterion and r["eps"] == eps:
            return r
    raise KeyError((name, criterion, eps))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
