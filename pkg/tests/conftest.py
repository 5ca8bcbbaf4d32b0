import os

import pytest

# acceptance outcomes, in the order the criteria ran
ACCEPTANCE = {}


@pytest.fixture
def record_acceptance():
    def record(key, passed, detail=""):
        ACCEPTANCE[key] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if passed else 'FAIL'} {detail}")


@pytest.fixture(autouse=True)
def _single_thread(monkeypatch):
    # keep worker pools deterministic in size regardless of the host
    if "PARTICLE_LIMITS_THREADS" not in os.environ:
        monkeypatch.setenv("PARTICLE_LIMITS_THREADS", "1")
