import math
import numpy as np
import pytest
from layerkit.mesh import (
    Mesh1D,
    MeshConfig,
    TensorMesh2D,
    bakhvalov_points,
    mesh_report,
    tensor_mesh,
)

GRID = [
    (n, eps, sigma)
    for n in (8, 16, 32)
    for eps in (1e-2, 1e-4, 1e-8)
    for sigma in (2.0, 3.0)
]

def test_transition_point():
    # x_{N/2} = -(sigma eps / beta) ln eps, independent of N
    mesh = bakhvalov_points(MeshConfig(n=8, epsilon=0.01, sigma=2.0, beta=1.0))
    assert mesh.points[4] == pytest.approx(0.0921034, rel=1e-6)
    other = bakhvalov_points(MeshConfig(n=32, epsilon=0.01, sigma=2.0, beta=1.0))
    assert other.points[16] == mesh.points[4]

def test_first_fine_point():
    mesh = bakhvalov_points(MeshConfig(n=8, epsilon=0.01, sigma=2.0, beta=1.0))
    expected = -0.02 * math.log(1 - 2 * 0.99 / 8)
    assert mesh.points[1] == pytest.approx(expected, rel=1e-14)
    assert mesh.points[1] == pytest.approx(0.00569, rel=1e-3)

def test_endpoints_exact():
    mesh = bakhvalov_points(MeshConfig(n=16, epsilon=1e-6, sigma=3.0, beta=2.0))
    assert mesh.points[0] == 0.0
    assert mesh.points[-1] == 1.0
    assert mesh.n == 16
    assert np.all(mesh.steps > 0)

def test_coarse_part_uniform():
    mesh = bakhvalov_points(MeshConfig(n=8, epsilon=1e-4, sigma=2.0, beta=1.0))
    coarse = mesh.steps[4:]
    expected = 2 * (1 - mesh.points[4]) / 8
    np.testing.assert_allclose(coarse, expected, rtol=1e-13)

def test_arrays_read_only():
    mesh = bakhvalov_points(MeshConfig(n=8, epsilon=1e-4))
    with pytest.raises(ValueError):
        mesh.points[1] = 0.5

@pytest.mark.parametrize("n, eps, sigma", GRID)
def test_mesh_report_bounds(n, eps, sigma):
    cfg = MeshConfig(n=n, epsilon=eps, sigma=sigma, beta=1.0)
    report = mesh_report(bakhvalov_points(cfg), cfg)
    assert report.fine_monotone
    assert report.coarse_min >= 1.0 - 1e-12
    assert report.coarse_max <= 2.0 + 1e-12
    assert report.transition_decay == pytest.approx(eps ** sigma, rel=1e-13)
    assert report.layer_width_value == pytest.approx((eps + 2 * (1 - eps) / n) ** sigma, rel=1e-12)
    assert sigma <= report.h0_over_epsN <= 4 * sigma
    assert 0.25 <= report.h_penultimate_over_sigma_eps <= 1.0
    assert report.h_last_fine_scaled >= 0.5
    assert report.h_last_fine_times_n <= 2 * sigma

def test_mesh_report_text_and_series():
    cfg = MeshConfig(n=8, epsilon=1e-4)
    report = mesh_report(bakhvalov_points(cfg), cfg)
    series = report.to_series()
    assert series["transition_value"] == report.transition_value
    text = report.to_text()
    assert "fine_monotone" in text
    assert len(text.splitlines()) == len(series)

def test_to_text_format():
    mesh = bakhvalov_points(MeshConfig(n=8, epsilon=0.01))
    lines = mesh.to_text().splitlines()
    assert len(lines) == 9
    assert lines[0] == "0 0"
    assert lines[-1] == "8 1"
    index, value = lines[4].split()
    assert index == "4"
    assert float(value) == mesh.points[4]

@pytest.mark.parametrize("n", [7, 2, 0])
def test_invalid_n(n):
    with pytest.raises(ValueError, match="even and at least 4"):
        bakhvalov_points(MeshConfig(n=n, epsilon=1e-4))

def test_non_integer_n():
    with pytest.raises(TypeError, match="must be an integer"):
        bakhvalov_points(MeshConfig(n=8.0, epsilon=1e-4))

@pytest.mark.parametrize("eps", [0.0, -1e-3, 1.0])
def test_invalid_epsilon(eps):
    with pytest.raises(ValueError, match="epsilon"):
        bakhvalov_points(MeshConfig(n=8, epsilon=eps))

def test_large_epsilon_needs_override():
    with pytest.raises(ValueError, match="allow_large_eps"):
        bakhvalov_points(MeshConfig(n=8, epsilon=0.2))
    mesh = bakhvalov_points(MeshConfig(n=8, epsilon=0.2, allow_large_eps=True))
    assert mesh.points[-1] == 1.0

def test_transition_outside_domain():
    with pytest.raises(ValueError, match="Transition point"):
        bakhvalov_points(MeshConfig(n=8, epsilon=0.5, sigma=4.0, allow_large_eps=True))

def test_invalid_sigma_and_beta():
    with pytest.raises(ValueError, match="sigma"):
        bakhvalov_points(MeshConfig(n=8, epsilon=1e-4, sigma=0.5))
    with pytest.raises(ValueError, match="beta"):
        bakhvalov_points(MeshConfig(n=8, epsilon=1e-4, beta=0.0))

def test_mesh1d_validation():
    with pytest.raises(ValueError, match="start at 0"):
        Mesh1D([0.1, 0.5, 1.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        Mesh1D([0.0, 0.5, 0.5, 1.0])

def test_tensor_mesh():
    mesh = tensor_mesh(MeshConfig(n=8, epsilon=1e-4, beta=2.0), MeshConfig(n=8, epsilon=1e-4, beta=1.0))
    assert mesh.n == 8
    assert mesh.n_cells == 64
    areas = mesh.cell_areas()
    assert areas.shape == (8, 8)
    assert areas.sum() == pytest.approx(1.0)
    # cell [j, i] has area hy_j * hx_i
    assert areas[1, 0] == pytest.approx(mesh.mesh_y.steps[1] * mesh.mesh_x.steps[0])

def test_tensor_mesh_mismatched_n():
    with pytest.raises(ValueError, match="Mismatched N"):
        tensor_mesh(MeshConfig(n=8, epsilon=1e-4), MeshConfig(n=16, epsilon=1e-4))
    with pytest.raises(ValueError, match="same number of cells"):
        TensorMesh2D(Mesh1D([0.0, 0.5, 1.0]), Mesh1D([0.0, 0.25, 0.5, 1.0]))

def test_locate(uniform_mesh):
    mesh = uniform_mesh(4)
    i, j = mesh.locate([0.1, 0.25, 1.0], [0.9, 0.5, 0.0])
    np.testing.assert_array_equal(i, [0, 1, 3])
    np.testing.assert_array_equal(j, [3, 2, 0])

def test_tensor_mesh_decay_per_direction():
    mesh = tensor_mesh(MeshConfig(n=8, epsilon=0.01, sigma=2.0, beta=2.0),
                       MeshConfig(n=8, epsilon=0.01, sigma=2.0, beta=1.0))
    assert mesh.mesh_x.points[4] == pytest.approx(0.01 * math.log(100), rel=1e-14)
    assert mesh.mesh_x.points[4] == pytest.approx(0.046051, abs=1e-6)
    assert mesh.mesh_y.points[4] == pytest.approx(0.092103, abs=1e-6)

def test_random_configurations_give_valid_meshes():
    rng = np.random.default_rng(1234)
    for _ in range(200):
        n = 2 * int(rng.integers(2, 65))
        eps = 10 ** rng.uniform(-10, np.log10(min(1 / n, 1e-2)))
        cfg = MeshConfig(n=n, epsilon=eps, sigma=rng.uniform(1, 4), beta=rng.uniform(0.5, 3))
        mesh = bakhvalov_points(cfg)
        assert mesh.points[0] == 0.0
        assert mesh.points[-1] == 1.0
        assert np.all(mesh.steps > 0)
        report = mesh_report(mesh, cfg)
        assert report.fine_monotone
        assert 1.0 - 1e-12 <= report.coarse_min <= report.coarse_max <= 2.0 + 1e-12
