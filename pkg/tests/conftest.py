import numpy as np
import pytest

from objaware.core import PatchGeometry


@pytest.fixture
def geom():
    return PatchGeometry(frames=4, channels=2, height=8, width=12, patch_t=2, patch_h=4, patch_w=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
