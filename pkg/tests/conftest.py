import numpy as np
import pytest

from schrosteer.spectral import Grid1D, builtin_potential, coupling_matrix, solve_dirichlet_eigs

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid1000():
    return Grid1D(0.0, 1.0, 1000)


@pytest.fixture(scope="session")
def free_system(grid1000):
    """V = 0, Q = x, eight modes."""
    basis = solve_dirichlet_eigs(builtin_potential(grid1000, "zero"), 8)
    return basis, coupling_matrix(builtin_potential(grid1000, "linear"), basis)


@pytest.fixture(scope="session")
def tilted_system(grid1000):
    """V = 3x, Q = x: every coupling of mode 1 is nonzero."""
    def make(N):
        basis = solve_dirichlet_eigs(builtin_potential(grid1000, "linear", slope=3.0), N)
        return basis, coupling_matrix(builtin_potential(grid1000, "linear"), basis)
    return make


def random_state(rng, N):
    c = rng.normal(size=N) + 1j * rng.normal(size=N)
    return c / np.linalg.norm(c)
