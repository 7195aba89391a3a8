import pytest

from vsic import lindblad

_audit = lindblad.enable_audit()
_acceptance = []


@pytest.fixture(scope="session")
def state_audit():
    return _audit


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def pytest_sessionfinish(session, exitstatus):
    if _audit.failures:
        print(f"\ndensity-matrix audit: {len(_audit.failures)} invalid states "
              f"out of {_audit.checked}: {_audit.failures[:5]}")
        session.exitstatus = 1
    else:
        print(f"\ndensity-matrix audit: {_audit.checked} states checked, all valid")
