import pytest

from ntqpt import ModelSpec, QuenchSetup, diagonalize_by_parity


@pytest.fixture(scope="session")
def lmg2000():
    return QuenchSetup.prepare(ModelSpec("LMG", 2000, 0.7))


@pytest.fixture(scope="session")
def lmg500_spectrum():
    return diagonalize_by_parity(ModelSpec("LMG", 500, 0.7))


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
