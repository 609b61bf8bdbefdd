import numpy as np
import pytest

from opmimo.config import SystemConfig, validate


@pytest.fixture
def rng():
    return np.random.default_rng(20181015)


@pytest.fixture
def default_config():
    return validate(SystemConfig())


def small_config(**kw):
    base = dict(num_subcarriers=4, num_ofdm_symbols=4, cp_length=2, num_antennas=2,
                code_spec="3:5,7", num_frames=10)
    base.update(kw)
    return SystemConfig().replace(**base)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
