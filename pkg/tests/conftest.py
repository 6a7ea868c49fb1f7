import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def criterion_report():
    """Collects one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def report(number, name, passed, detail=""):
        line = f"criterion {number:>3} {'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        _LINES.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
