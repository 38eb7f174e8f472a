import numpy as np
import pytest
from hypothesis import settings

from ccagate.model import SystemParams

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def params():
    """Working point of the interaction step: g = 0.1, nu = 10, drive = 50 (units of delta)."""
    return SystemParams(g=0.1, nu=10.0, omega_drive=50.0, omega_mw=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, n):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (x + x.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# acceptance verdicts, filled by test_acceptance.py and echoed after the run
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split("-")[0]), k)):
            terminalreporter.write_line(ACCEPTANCE[key])
