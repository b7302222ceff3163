import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from periodic_euler.gas import GasParams, derive_constants

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GAMMAS = (1.2, 1.4, 5.0 / 3.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=GAMMAS, ids=lambda g: f"gamma={g:.3g}")
def gas(request):
    return GasParams(request.param)


@pytest.fixture
def gas2():
    return GasParams(2.0)


@pytest.fixture
def consts2(gas2):
    return derive_constants(10.0, 0.1, 1.0, 0.5, gas2)


# -- acceptance summary --------------------------------------------------------

ACCEPTANCE: dict[int, tuple] = {}


@pytest.fixture
def acceptance():
    """record(k, name, passed, runtime, limit, detail) -> overall verdict, runtime included."""
    def record(k, name, passed, runtime, limit, detail=""):
        ok = bool(passed) and runtime < limit
        ACCEPTANCE[k] = (ok, name, runtime, limit, detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, name, runtime, limit, detail = ACCEPTANCE[k]
        terminalreporter.write_line(
            f"ACCEPTANCE {k:2d} {'PASS' if ok else 'FAIL'} {name} "
            f"({runtime:.2f} s / {limit:g} s) {detail}")
