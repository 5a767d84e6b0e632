import numpy as np
import pytest

from lambdajc.model import CoherentModeSpec, FockGrid, NonlinearitySpec, SystemParams

CONST = NonlinearitySpec.constant()
SQRT = NonlinearitySpec.sqrt_n()
INV = NonlinearitySpec.inverse_sqrt_n()

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def coherent10():
    mode = CoherentModeSpec.from_mean_photon(10.0)
    return (mode, mode)


@pytest.fixture(scope="session")
def small_modes():
    return (CoherentModeSpec(1.3 + 0.4j), CoherentModeSpec(0.9 - 0.7j))


@pytest.fixture(scope="session")
def small_grid(small_modes):
    return FockGrid.for_modes(small_modes)


def make_params(chi=0.0, f=CONST, g=CONST, delta=(0.0, 0.0), **kw):
    return SystemParams(chi=chi, f_spec=(f, f), g_spec=(g, g), delta_override=delta, **kw)
