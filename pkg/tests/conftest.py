import pytest

_verdicts = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if name.startswith("test_criterion_"):
            _verdicts[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_verdicts, key=lambda n: int(n.split("_")[2])):
        mark = "PASS" if _verdicts[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")


@pytest.fixture
def tmp_trace(tmp_path):
    return tmp_path / "t.trace"
