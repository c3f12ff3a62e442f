import numpy as np
import pytest

from momnash.game import benchmark_game, solve_equilibrium

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {text}")


@pytest.fixture
def report():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    def record(num, passed, text):
        ACCEPTANCE[num] = (bool(passed), text)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {text}")
    return record


@pytest.fixture(scope="session")
def game15():
    return benchmark_game(15)


@pytest.fixture(scope="session")
def x_star15(game15):
    return solve_equilibrium(game15)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
