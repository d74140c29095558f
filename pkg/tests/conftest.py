import numpy as np
import pytest

from ptp.components import create_component
from ptp.config import GlobalParams

ACCEPTANCE_RESULTS: list[str] = []


def make(type_id, name="c", globals_=None, priority=1, seed=1337, workdir=None, **params):
    """Create and initialize a single component."""
    section = {"type": type_id, "priority": priority, **params}
    comp = create_component(name, section, seed=seed, workdir=workdir)
    comp.initialize(globals_ if globals_ is not None else GlobalParams())
    return comp


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
