import numpy as np
import pytest
from hypothesis import settings

from niscal.constants import MHz_to_rad
from niscal.thermal import build_model

settings.register_profile("default", deadline=None)
settings.load_profile("default")

DEVICE_GAIN_DB = 51.84
DEVICE_T_AMP = 11.0


@pytest.fixture(scope="session")
def device_model():
    return build_model(
        gamma_bar=MHz_to_rad(17.39),
        gamma_tr=MHz_to_rad(1.78),
        gamma_x=MHz_to_rad(0.46),
        gain_dB=DEVICE_GAIN_DB,
        noise_temperature=DEVICE_T_AMP,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion.

    Usage: ``acceptance(n, ok, detail)``; the lines are printed in the
    terminal summary and the call asserts ``ok``.
    """

    def record(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[criterion] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[key])
