import numpy as np
import pytest

from icefem.mesh import build_uniform_mesh, unit_square_two_triangles


@pytest.fixture(scope="session")
def square():
    """Unit square, 77 edges."""
    return build_uniform_mesh(1.0, 1.0, 0.25)


@pytest.fixture(scope="session")
def km_mesh():
    """500 km domain at 50 km resolution (the coarsest desk mesh)."""
    return build_uniform_mesh(500e3, 500e3, 50e3)


@pytest.fixture(scope="session")
def two_triangles():
    return unit_square_two_triangles()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
