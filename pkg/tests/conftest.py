import numpy as np
import pytest

from jbdpro.diagnostics import build_report
from jbdpro.jbd import StrategyConfig, jbd_run
from jbdpro.projector import ProjectionProvider
from jbdpro.testgen import builtin_pair


@pytest.fixture(scope="session")
def cs800():
    pair, truth = builtin_pair("cs800")
    return pair, truth, ProjectionProvider.explicit(pair)


@pytest.fixture(scope="session")
def mult800():
    pair, truth = builtin_pair("mult800")
    return pair, truth, ProjectionProvider.explicit(pair)


@pytest.fixture(scope="session")
def cs800_runs(cs800):
    """200-step runs of every strategy on cs800 with their diagnostics."""
    _, _, prov = cs800
    out = {}
    for kind in ("none", "partial", "full"):
        state = jbd_run(prov, np.ones(800), 200, StrategyConfig(kind))
        out[kind] = (state, build_report(state, prov))
    return out


@pytest.fixture(scope="session")
def mult800_runs(mult800):
    _, _, prov = mult800
    return {
        kind: jbd_run(prov, np.ones(800), 300, StrategyConfig(kind)) for kind in ("none", "partial")
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
