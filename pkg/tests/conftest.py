import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ginibre(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# Acceptance results: criterion number -> list of (clause, passed, detail).
ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    def record(criterion: int, clause: str, passed: bool, detail: str = ""):
        ACCEPTANCE.setdefault(criterion, []).append((clause, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        clauses = ACCEPTANCE.get(n)
        if not clauses:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
            continue
        ok = all(p for _, p, _ in clauses)
        parts = "; ".join(f"{c} {'ok' if p else 'FAILED'}{f' ({d})' if d else ''}" for c, p, d in clauses)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {parts}")
