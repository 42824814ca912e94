import pytest

_CRITERIA: list[str] = []


class CriterionLog:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def check(self, number: int, title: str, passed: bool, detail: str = "") -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}"
        if detail:
            line += f" | {detail}"
        _CRITERIA.append(line)
        print(line)
        assert passed, line


@pytest.fixture
def criterion():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
