import pytest

from layerkit.mesh import Mesh1D, TensorMesh2D


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full convergence-table runs (minutes)")


@pytest.fixture
def uniform_mesh():
    """Uniform tensor mesh with N cells per direction, for hand-checked integrals."""
    def build(n):
        points = [i / n for i in range(n + 1)]
        return TensorMesh2D(Mesh1D(points), Mesh1D(points))
    return build
