import pytest

RESULTS = []


@pytest.fixture
def record():
    """Register one acceptance line: ``record(number, name, ok, detail)``."""

    def add(number, name, ok, detail=""):
        RESULTS.append((number, name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {name} {detail}".rstrip())

    return add


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(RESULTS, key=lambda r: r[0]):
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {name}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
