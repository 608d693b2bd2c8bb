import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_report(pytestconfig):
    """Record one PASS/FAIL verdict line, shown after the run summary."""
    def _report(number: int, label: str, ok: bool, detail: str = ""):
        verdict = "PASS" if ok else "FAIL"
        line = f"acceptance {number:2d} {verdict}  {label}"
        if detail:
            line += f"  [{detail}]"
        pytestconfig._acceptance_lines.append(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
