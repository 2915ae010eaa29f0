import pytest

_VERDICTS = []


@pytest.fixture
def report(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def _report(criterion: str, ok: bool, detail: str = "") -> bool:
        line = f"{criterion}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
