import numpy as np
import pytest
from layerkit.fespace import (
    BasisSet,
    basis_eval_1d,
    build_dof_map,
    cell_quadrature,
    composite_rule,
    gauss_rule,
    node_coordinates,
)
from layerkit.mesh import MeshConfig, tensor_mesh

@pytest.mark.parametrize("q", range(1, 9))
def test_gauss_rule_exactness(q):
    rule = gauss_rule(q)
    assert rule.count == q
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for p in range(2 * q):
        assert np.dot(rule.weights, rule.points ** p) == pytest.approx(1.0 / (p + 1), abs=1e-13)

def test_gauss_rule_degree_15():
    rule = gauss_rule(8)
    value = np.dot(rule.weights, rule.points ** 15)
    assert abs(value - 1.0 / 16) < 1e-13

def test_gauss_rule_points_inside():
    rule = gauss_rule(16)
    assert np.all((rule.points > 0) & (rule.points < 1))
    assert np.all(np.diff(rule.points) > 0)

@pytest.mark.parametrize("q", [0, 17])
def test_gauss_rule_out_of_range(q):
    with pytest.raises(ValueError, match="quadrature points"):
        gauss_rule(q)

def test_gauss_rule_type():
    with pytest.raises(TypeError):
        gauss_rule(2.0)

@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_partition_of_unity(k):
    rng = np.random.default_rng(7)
    t = rng.random(50)
    values, derivatives = BasisSet(k).evaluate(t)
    assert values.shape == (50, k + 1)
    np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(derivatives.sum(axis=1), 0.0, atol=1e-12)

@pytest.mark.parametrize("k", [1, 2, 3])
def test_kronecker_property(k):
    basis = BasisSet(k)
    values, _ = basis.evaluate(basis.ref_nodes)
    np.testing.assert_allclose(values, np.eye(k + 1), atol=1e-14)

def test_linear_basis():
    values, derivatives = basis_eval_1d(BasisSet(1), 0.25)
    np.testing.assert_allclose(values, [0.75, 0.25])
    np.testing.assert_allclose(derivatives, [-1.0, 1.0])

def test_derivatives_match_finite_differences():
    basis = BasisSet(3)
    t = np.array([0.2, 0.55, 0.8])
    step = 1e-6
    _, derivatives = basis.evaluate(t)
    plus, _ = basis.evaluate(t + step)
    minus, _ = basis.evaluate(t - step)
    np.testing.assert_allclose(derivatives, (plus - minus) / (2 * step), rtol=1e-6, atol=1e-8)

def test_basis_reproduces_polynomials():
    # sum_a p(node_a) theta_a(t) = p(t) for deg p <= k
    basis = BasisSet(3)
    t = np.linspace(0, 1, 11)
    values, _ = basis.evaluate(t)
    p = lambda s: 1 - 2 * s + 3 * s ** 3
    np.testing.assert_allclose(values @ p(basis.ref_nodes), p(t), atol=1e-13)

def test_evaluate_outside_interval():
    with pytest.raises(ValueError, match="must lie in"):
        BasisSet(2).evaluate([0.5, 1.5])

def test_invalid_degree():
    with pytest.raises(ValueError, match="at least 1"):
        BasisSet(0)
    with pytest.raises(TypeError):
        BasisSet(1.5)

def test_basis_eval_1d_scalar_only():
    with pytest.raises(TypeError):
        basis_eval_1d(BasisSet(1), np.array([0.1, 0.2]))

def test_single_interior_node(uniform_mesh):
    dof_map = build_dof_map(uniform_mesh(2), 1)
    assert dof_map.n_interior == 1
    assert dof_map.interior_index[1, 1] == 0
    assert (dof_map.interior_index == -1).sum() == 8
    np.testing.assert_allclose(dof_map.x_nodes, [0.0, 0.5, 1.0])

@pytest.mark.parametrize("k, n", [(1, 8), (2, 8), (3, 4)])
def test_interior_dimension(k, n):
    mesh = tensor_mesh(MeshConfig(n, 1e-4), MeshConfig(n, 1e-4))
    dof_map = build_dof_map(mesh, k)
    assert dof_map.nodes_per_direction == k * n + 1
    assert dof_map.n_interior == (k * n - 1) ** 2
    interior = dof_map.interior_index[dof_map.interior_index >= 0]
    np.testing.assert_array_equal(np.sort(interior), np.arange((k * n - 1) ** 2))

def test_node_coordinates():
    nodes = node_coordinates(np.array([0.0, 0.2, 1.0]), 2)
    np.testing.assert_allclose(nodes, [0.0, 0.1, 0.2, 0.6, 1.0])

def test_cell_full_indices(uniform_mesh):
    dof_map = build_dof_map(uniform_mesh(2), 1)
    flat = dof_map.cell_full_indices()
    assert flat.shape == (2, 2, 4)
    # cell j=0, i=1 holds x-nodes 1, 2 and y-nodes 0, 1 on a 3x3 grid
    np.testing.assert_array_equal(flat[0, 1], [1, 2, 4, 5])
    np.testing.assert_array_equal(flat[1, 0], [3, 4, 6, 7])

def test_interior_coordinates_x_fastest(uniform_mesh):
    dof_map = build_dof_map(uniform_mesh(4), 1)
    xs, ys = dof_map.interior_coordinates()
    assert xs.size == 9
    np.testing.assert_allclose(xs[:3], [0.25, 0.5, 0.75])
    np.testing.assert_allclose(ys[:3], 0.25)
    assert ys[3] == pytest.approx(0.5)

def test_dump(uniform_mesh):
    dof_map = build_dof_map(uniform_mesh(4), 1)
    lines = dof_map.dump().splitlines()
    assert len(lines) == 9
    index, x, y = lines[1].split()
    assert (int(index), float(x), float(y)) == (1, 0.5, 0.25)

def test_cell_quadrature():
    mesh = tensor_mesh(MeshConfig(8, 1e-4, beta=2.0), MeshConfig(8, 1e-4))
    X, Y, W = cell_quadrature(mesh, gauss_rule(3))
    assert X.shape == Y.shape == W.shape == (8, 8, 3, 3)
    assert W.sum() == pytest.approx(1.0, abs=1e-14)
    # points of cell [j, i] lie inside it
    assert np.all(X[:, 2] > mesh.mesh_x.points[2]) and np.all(X[:, 2] < mesh.mesh_x.points[3])
    assert np.all(Y[5] > mesh.mesh_y.points[5]) and np.all(Y[5] < mesh.mesh_y.points[6])
    # integral of x*y over the unit square
    assert np.sum(W * X * Y) == pytest.approx(0.25, abs=1e-14)

def test_composite_rule():
    rule = composite_rule(3, 4)
    assert rule.count == 12
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.diff(rule.points) > 0)
    # exact for degree 5 and more accurate than one rule on a steep exponential
    assert np.dot(rule.weights, rule.points ** 5) == pytest.approx(1 / 6, abs=1e-14)
    exact = (1 - np.exp(-40.0)) / 40.0
    single = gauss_rule(3)
    assert abs(np.dot(rule.weights, np.exp(-40 * rule.points)) - exact) < \
        abs(np.dot(single.weights, np.exp(-40 * single.points)) - exact)

def test_composite_rule_single_part_is_gauss():
    np.testing.assert_array_equal(composite_rule(4).points, gauss_rule(4).points)
    with pytest.raises(ValueError):
        composite_rule(4, 0)

def test_quadratic_basis_at_quarter():
    values, derivatives = basis_eval_1d(BasisSet(2), 0.25)
    np.testing.assert_allclose(values, [0.375, 0.75, -0.125], rtol=1e-14)
    np.testing.assert_allclose(derivatives, [-2.0, 2.0, 0.0], atol=1e-14)

def test_linear_nodes_are_mesh_points():
    mesh = tensor_mesh(MeshConfig(8, 1e-4, 2.0, 2.0), MeshConfig(8, 1e-4, 2.0, 1.0))
    dof_map = build_dof_map(mesh, 1)
    np.testing.assert_array_equal(dof_map.x_nodes, mesh.mesh_x.points)
    np.testing.assert_array_equal(dof_map.y_nodes, mesh.mesh_y.points)
    assert dof_map.n_interior == 49
