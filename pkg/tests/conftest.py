import numpy as np
import pytest

from pgap_density import MCPDensity
from pgap_geometry import Params, Tolerances

# Loose enough to keep the suite quick, tight enough for 1e-5 comparisons
FAST = Tolerances(rtol=1e-9, atol=1e-11, lambda_tol=1e-8, samples=1025,
                  scan_points=12, golden_tol=1e-4, keep_minima=2)


@pytest.fixture
def fast_tol():
    return FAST


@pytest.fixture
def hyperbolic(fast_tol):
    """p = 2, K = -1, N = 3, D = 1."""
    return Params(2.0, -1.0, 3.0, 1.0, fast_tol)


@pytest.fixture
def flat_density():
    """h = 1 on [0, pi], an MCP(0, 2) density."""
    grid = np.linspace(0.0, np.pi, 1025)
    zeros = np.zeros_like(grid)
    return MCPDensity(0.0, 2.0, np.pi, grid, zeros, zeros, label='flat')
