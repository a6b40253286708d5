import numpy as np
import pytest

from ris_locate.geometry import RisPose
from ris_locate.signal import SystemConfig

import _report


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def pose():
    return RisPose((0.0, 0.0), np.pi / 6)


@pytest.fixture
def small_cfg():
    return SystemConfig(M=8, N_c=16, T=4)


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_report.LINES):
            terminalreporter.write_line(line)
