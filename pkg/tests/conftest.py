import numpy as np
import pytest

from taupath.model import load_model


def pytest_addoption(parser):
    parser.addoption("--extended", action="store_true", default=False,
                     help="run full-scale checks that take tens of minutes")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip = pytest.mark.skip(reason="needs --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def birth_death():
    return load_model("birth_death")


@pytest.fixture(scope="session")
def repressilator():
    return load_model("repressilator")


@pytest.fixture(scope="session")
def toggle_switch():
    return load_model("toggle_switch")


def within(mean, target, se, k=3.0):
    """|mean - target| <= k * se, with a readable failure message."""
    assert abs(mean - target) <= k * se, f"{mean} vs {target}: {abs(mean - target) / se:.2f} SE"


def stderr(a):
    a = np.asarray(a, dtype=float)
    return a.std(ddof=1) / np.sqrt(a.size)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
