import numpy as np
import pytest

from mcgraph.grid_fields import GeometrySign, GridSpec
from mcgraph.solver import CurvatureSpec, compute_core

# A non-axisymmetric source: three bumps with different signs and widths.
MULTI_BUMP = (
    (3.0, 1.0, (1.0, 0.0, 0.0)),
    (-2.0, 0.8, (-0.5, 1.0, 0.0)),
    (1.5, 0.9, (0.0, -0.5, 1.0)),
)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(8.0, 64)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(8.0, 32)


@pytest.fixture(scope="session")
def gaussian_cores(grid64):
    """Square-root hierarchy to K=4 for the Gaussian preset, both signs."""
    H0 = CurvatureSpec.gaussian().sample(grid64)
    return {s: compute_core(H0, s, 4, "sqrt") for s in GeometrySign}


@pytest.fixture(scope="session")
def multi_bump_cores(grid64):
    H0 = CurvatureSpec.multi_bump(MULTI_BUMP).sample(grid64)
    return {s: compute_core(H0, s, 4, "sqrt", with_u=False) for s in GeometrySign}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
