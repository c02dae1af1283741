"""
Tensor-product Lagrange elements of degree k on rectangular cells.

The nodal basis on the reference interval [0, 1] uses the k + 1 equispaced
nodes {0, 1/k, ..., 1}; on the cell [x_i, x_{i+1}] these map to
x_i^s = x_i + (s/k) h_{x,i}. Two-dimensional basis functions are products
theta^s(x) * theta^t(y).

Global nodes are numbered lexicographically with x running fastest. Only
interior nodes carry a degree of freedom (homogeneous Dirichlet data).
"""

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from numpy.polynomial import legendre

from layerkit.mesh import TensorMesh2D

MAX_GAUSS_POINTS = 16


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Degree-k Lagrange basis on [0, 1] with equispaced nodes."""

    degree: int
    ref_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        if isinstance(self.degree, bool) or not isinstance(self.degree, (int, np.integer)):
            raise TypeError("The polynomial degree must be an integer.")
        if self.degree < 1:
            raise ValueError(f"The polynomial degree must be at least 1, got {self.degree}.")
        object.__setattr__(self, "ref_nodes", _frozen(np.linspace(0.0, 1.0, self.degree + 1)))

    @property
    def size(self) -> int:
        return self.degree + 1

    def evaluate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """
        Values and first derivatives of all basis functions at the reference
        points `t`.

        Parameters
        ----------
        t : array_like
            Reference coordinates in [0, 1], any shape.

        Returns
        -------
        values, derivatives : numpy.ndarray
            Arrays of shape t.shape + (k + 1,).

        Raises
        ------
        ValueError
            If any point lies outside [0, 1].
        """
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError("Reference coordinates must lie in [0, 1].")

        nodes = self.ref_nodes
        m = nodes.size
        values = np.ones(t.shape + (m,))
        derivatives = np.zeros(t.shape + (m,))
        for a in range(m):
            others = [l for l in range(m) if l != a]
            for l in others:
                values[..., a] *= (t - nodes[l]) / (nodes[a] - nodes[l])
            # product rule: drop one factor at a time
            for l in others:
                term = np.full(t.shape, 1.0 / (nodes[a] - nodes[l]))
                for p in others:
                    if p != l:
                        term = term * (t - nodes[p]) / (nodes[a] - nodes[p])
                derivatives[..., a] += term
        return values, derivatives


def basis_eval_1d(basis: BasisSet, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the k + 1 basis functions at one point t in [0, 1]."""
    if np.ndim(t) != 0:
        raise TypeError("basis_eval_1d expects a scalar reference coordinate; use BasisSet.evaluate for arrays.")
    return basis.evaluate(t)


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Gauss-Legendre rule on [0, 1]; weights are positive and sum to 1."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return self.points.size


def gauss_rule(q: int) -> QuadRule:
    """
    q-point Gauss-Legendre rule mapped to [0, 1], exact for polynomials of
    degree up to 2q - 1.

    Raises
    ------
    ValueError
        If q is outside 1..16.
    """
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
        raise TypeError("The number of quadrature points must be an integer.")
    if not 1 <= q <= MAX_GAUSS_POINTS:
        raise ValueError(f"The number of quadrature points must be in 1..{MAX_GAUSS_POINTS}, got {q}.")
    points, weights = legendre.leggauss(q)
    return QuadRule(_frozen(0.5 * (points + 1.0)), _frozen(0.5 * weights))


def composite_rule(q: int, subdivisions: int = 1) -> QuadRule:
    """q-point Gauss rule on each of `subdivisions` equal parts of [0, 1]."""
    if isinstance(subdivisions, bool) or not isinstance(subdivisions, (int, np.integer)) or subdivisions < 1:
        raise ValueError(f"subdivisions must be a positive integer, got {subdivisions}.")
    rule = gauss_rule(q)
    if subdivisions == 1:
        return rule
    offsets = np.arange(subdivisions)[:, None]
    points = (offsets + rule.points[None, :]) / subdivisions
    weights = np.broadcast_to(rule.weights / subdivisions, points.shape)
    return QuadRule(_frozen(points.ravel()), _frozen(weights.ravel()))


def cell_quadrature(mesh: TensorMesh2D, rule: QuadRule) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Tensor Gauss points on every cell.

    Returns
    -------
    X, Y, W : numpy.ndarray
        Arrays of shape (N, N, q, q) indexed [j, i, h, g]: the coordinates
        (x_i + t_g h_{x,i}, y_j + t_h h_{y,j}) and the weights scaled by the
        cell area.
    """
    t, w = rule.points, rule.weights
    x = mesh.mesh_x.points[:-1, None] + mesh.mesh_x.steps[:, None] * t[None, :]
    y = mesh.mesh_y.points[:-1, None] + mesh.mesh_y.steps[:, None] * t[None, :]
    shape = (mesh.n, mesh.n, t.size, t.size)
    X = np.broadcast_to(x[None, :, None, :], shape)
    Y = np.broadcast_to(y[:, None, :, None], shape)
    W = mesh.cell_areas()[:, :, None, None] * np.outer(w, w)[None, None, :, :]
    return X, Y, W


@dataclass(frozen=True, eq=False)
class DofMap:
    """
    Global node coordinates and interior numbering of a Q_k space.

    Attributes
    ----------
    mesh : TensorMesh2D
    degree : int
    x_nodes, y_nodes : numpy.ndarray
        The kN + 1 node coordinates per direction.
    interior_index : numpy.ndarray
        Integer array of shape (kN + 1, kN + 1) indexed [J, I]; the interior
        degree of freedom of node (x_nodes[I], y_nodes[J]) or -1 on the
        boundary.
    """

    mesh: TensorMesh2D
    degree: int
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    interior_index: np.ndarray

    @property
    def nodes_per_direction(self) -> int:
        return self.x_nodes.size

    @property
    def n_interior(self) -> int:
        return (self.nodes_per_direction - 2) ** 2

    def local_node_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Global node indices of every cell.

        Returns
        -------
        cols, rows : numpy.ndarray
            cols[i, a] = k*i + a is the global x-index of local node a in
            column i of cells; rows[j, b] = k*j + b likewise in y.
        """
        k, n = self.degree, self.mesh.n
        local = np.arange(k + 1)
        offsets = k * np.arange(n)
        return offsets[:, None] + local[None, :], offsets[:, None] + local[None, :]

    def cell_full_indices(self) -> np.ndarray:
        """
        Flat (x-fastest) node indices per cell, shape (N, N, (k+1)^2) indexed
        [j, i, b*(k+1) + a].
        """
        cols, rows = self.local_node_indices()
        width = self.nodes_per_direction
        flat = rows[:, None, :, None] * width + cols[None, :, None, :]
        return flat.reshape(self.mesh.n, self.mesh.n, -1)

    def interior_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates of interior nodes in degree-of-freedom order."""
        X, Y = np.meshgrid(self.x_nodes[1:-1], self.y_nodes[1:-1])
        return X.ravel(), Y.ravel()

    def dump(self) -> str:
        """One `index x y` line per interior degree of freedom."""
        xs, ys = self.interior_coordinates()
        return "".join(f"{index} {x:.17g} {y:.17g}\n" for index, (x, y) in enumerate(zip(xs, ys)))


def node_coordinates(points: np.ndarray, degree: int) -> np.ndarray:
    """x_i^s = x_i + (s/k) h_i for all cells, followed by x_N."""
    points = np.asarray(points, dtype=float)
    steps = np.diff(points)
    s = np.arange(degree) / degree
    inner = points[:-1, None] + s[None, :] * steps[:, None]
    return np.concatenate([inner.ravel(), points[-1:]])


def build_dof_map(mesh: TensorMesh2D, k: Union[int, BasisSet]) -> DofMap:
    """
    Builds the node coordinates and interior numbering for Q_k on `mesh`.

    The interior dimension is (kN - 1)^2, numbered lexicographically with x
    fastest.
    """
    degree = k.degree if isinstance(k, BasisSet) else k
    if isinstance(degree, bool) or not isinstance(degree, (int, np.integer)) or degree < 1:
        raise ValueError(f"The polynomial degree must be a positive integer, got {degree}.")

    x_nodes = _frozen(node_coordinates(mesh.mesh_x.points, degree))
    y_nodes = _frozen(node_coordinates(mesh.mesh_y.points, degree))
    width = x_nodes.size
    inner = width - 2

    interior_index = -np.ones((width, width), dtype=np.int64)
    interior_index[1:-1, 1:-1] = np.arange(inner * inner).reshape(inner, inner)
    interior_index.setflags(write=False)
    return DofMap(mesh, int(degree), x_nodes, y_nodes, interior_index)
