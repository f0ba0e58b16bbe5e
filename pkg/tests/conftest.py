import pytest

from tailqaoa.instance import generate_planted, make_instance, solution_indices
from tailqaoa.ising import build_ising


@pytest.fixture
def toy():
    """Two flights; routes {0}, {1}, {0,1}. Covers: {0,1} and {2}."""
    return make_instance(2, [[0], [1], [0, 1]])


@pytest.fixture
def toy_model(toy):
    return build_ising(toy)


@pytest.fixture
def single():
    return make_instance(1, [[0]])


@pytest.fixture(scope="session")
def planted6():
    inst = generate_planted(10, 6, 3, seed=3)
    return inst, build_ising(inst), solution_indices(inst.known_solutions)


@pytest.fixture(scope="session")
def planted8():
    inst = generate_planted(77, 8, 4, seed=1)
    return inst, build_ising(inst), solution_indices(inst.known_solutions)


_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""
    def record(criterion: str, ok: bool, detail: str):
        _acceptance_lines.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
