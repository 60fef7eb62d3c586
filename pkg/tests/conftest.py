import numpy as np
import pytest
from hypothesis import strategies as st

from polarlab.channel import DiscreteBMC


def random_channel(rng: np.random.Generator, k: int) -> DiscreteBMC:
    cols = rng.dirichlet(np.ones(k), size=2).T
    return DiscreteBMC(cols)


@st.composite
def channels(draw, max_outputs=6):
    k = draw(st.integers(2, max_outputs))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_channel(np.random.default_rng(seed), k)


ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
