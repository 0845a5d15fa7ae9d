import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def toy_params():
    from gopa.crypto.pedersen import setup_from_beacon

    return setup_from_beacon(b"toy-beacon".ljust(32, b"."), "toy101")


@pytest.fixture(scope="session")
def params61():
    from gopa.crypto.pedersen import setup_from_beacon

    return setup_from_beacon(b"test-beacon-61".ljust(32, b"."), "schnorr61")


@pytest.fixture(scope="session")
def params127():
    from gopa.crypto.pedersen import setup_from_beacon

    return setup_from_beacon(b"test-beacon-127".ljust(32, b"."), "schnorr127")


# --- acceptance report ----------------------------------------------------

_CRITERIA = []


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def note(self, text):
        self.detail = text

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        secs = time.perf_counter() - self.t0
        line = f"criterion {self.number:>2} {status} ({secs:6.1f} s) {self.title}"
        if self.detail:
            line += f": {self.detail}"
        if exc_type is not None:
            line += f" [{exc_type.__name__}: {str(exc).splitlines()[0][:120] if str(exc) else ''}]"
        _CRITERIA.append((self.number, line))
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
