import numpy as np
import pytest

from pgcurves.geodesic_solver import SolverConfig, solve_through_vertices

GENERIC_FOUR = [0, 0.4 - 0.7j, 1, 0.5 + 2j]


@pytest.fixture(scope="session")
def four_vertex_solution():
    """Solver output for a fixed generic four-vertex instance (shared, it costs a few seconds)."""
    return solve_through_vertices(GENERIC_FOUR, SolverConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
