import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a one-line outcome for an acceptance criterion."""

    def _record(number, passed, detail):
        _ACCEPTANCE[number] = (passed, detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
