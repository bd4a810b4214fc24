import pytest

_CRITERIA: list[tuple[int, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion outcome; it is echoed at the end of the run."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _CRITERIA.append((number, passed, line))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(_CRITERIA):
        terminalreporter.write_line(line)
