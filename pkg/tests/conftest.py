import pytest

from srpcut.smt import find_solver


@pytest.fixture(scope="session")
def solver_cmd() -> str:
    cmd = find_solver()
    if cmd is None:
        pytest.skip("no SMT solver on PATH (install z3)")
    return cmd
