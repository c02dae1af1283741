"""
Galerkin assembly of

    a(u, v) = eps (grad u, grad v) - (b . grad u, v) + (c u, v),    l(v) = (f, v)

on a Q_k space with homogeneous Dirichlet data.

Cell matrices of size (k+1)^2 x (k+1)^2 are computed for all cells at once
with numpy.einsum and scattered into a scipy CSR matrix in lexicographic
cell order. Boundary nodes are eliminated by dropping their rows and columns.
The stiffness (without eps) and mass matrices are kept next to the system
matrix for energy-norm computations.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from layerkit.fespace import BasisSet, DofMap, build_dof_map, cell_quadrature, gauss_rule
from layerkit.mesh import TensorMesh2D
from layerkit.problems import Problem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssemblyOptions:
    """
    Attributes
    ----------
    quad_points : int, optional
        Gauss points per direction on each cell. Defaults to k + 2.
    deterministic : bool
        Sum the contributions to each nonzero in lexicographic cell order
        with a stable sort. When False the duplicates are summed by
        scipy's COO to CSR conversion.
    """

    quad_points: Optional[int] = None
    deterministic: bool = True

    def points_for(self, degree: int) -> int:
        q = degree + 2 if self.quad_points is None else self.quad_points
        if isinstance(q, bool) or not isinstance(q, (int, np.integer)) or q < 1:
            raise ValueError(f"quad_points must be a positive integer, got {q}.")
        return int(q)


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """
    Assembled linear system on the interior degrees of freedom.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
        A = eps K + convection + reaction, square of dimension (kN - 1)^2.
    rhs : numpy.ndarray
        Load vector (f, theta_r).
    dof_map : DofMap
    stiffness : scipy.sparse.csr_matrix
        K_rc = (grad theta_c, grad theta_r), without the factor eps.
    mass : scipy.sparse.csr_matrix
        M_rc = (theta_c, theta_r).
    epsilon : float
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: DofMap
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    epsilon: float

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]


def _reference_matrices(basis: BasisSet, rule):
    phi, dphi = basis.evaluate(rule.points)
    w = rule.weights
    mass_1d = np.einsum("g,ga,gc->ac", w, phi, phi)
    stiff_1d = np.einsum("g,ga,gc->ac", w, dphi, dphi)
    return phi, dphi, mass_1d, stiff_1d


def _scatter(local: np.ndarray, dof_index: np.ndarray, n: int, deterministic: bool = True) -> sp.csr_matrix:
    """Sums cell blocks local[j, i, r, c] into an n x n CSR matrix, skipping boundary nodes."""
    rows = np.broadcast_to(dof_index[:, :, :, None], local.shape)
    cols = np.broadcast_to(dof_index[:, :, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    rows, cols, data = rows[keep], cols[keep], local[keep]
    # explicit zeros stay in the pattern so that it is symmetric
    if not deterministic or data.size == 0:
        matrix = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        matrix.sum_duplicates()
        matrix.sort_indices()
        return matrix

    # cells are flattened in [j, i] order, so a stable sort keeps cell order within each nonzero
    keys = rows.astype(np.int64) * n + cols
    order = np.argsort(keys, kind="stable")
    keys, data = keys[order], data[order]
    starts = np.flatnonzero(np.concatenate([[True], keys[1:] != keys[:-1]]))
    values = np.add.reduceat(data, starts)
    unique = keys[starts]
    counts = np.bincount(unique // n, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    matrix = sp.csr_matrix((values, unique % n, indptr), shape=(n, n))
    matrix.sort_indices()
    return matrix


def _field(function, X, Y) -> np.ndarray:
    return np.broadcast_to(np.asarray(function(X, Y), dtype=float), X.shape)


def assemble_system(mesh: TensorMesh2D, k: Union[int, BasisSet], p: Problem,
                    opts: Optional[AssemblyOptions] = None) -> SparseSystem:
    """
    Assembles the Galerkin system for problem `p` with Q_k elements on `mesh`.

    Parameters
    ----------
    mesh : TensorMesh2D
        The rectangulation.
    k : int or BasisSet
        Polynomial degree.
    p : Problem
        Coefficients and source.
    opts : AssemblyOptions, optional
        Quadrature settings; q = k + 2 by default.

    Returns
    -------
    SparseSystem
        Matrix, load vector, degree-of-freedom map and the stiffness and mass
        parts.

    Raises
    ------
    TypeError
        If `mesh` is not a TensorMesh2D.
    ValueError
        If the degree or quadrature settings are invalid, epsilon is negative
        or the coefficients cannot be evaluated on the quadrature grid.
    """
    if not isinstance(mesh, TensorMesh2D):
        raise TypeError("assemble_system expects a TensorMesh2D.")
    if p.epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {p.epsilon}.")
    opts = opts or AssemblyOptions()

    dof_map = build_dof_map(mesh, k)
    degree = dof_map.degree
    basis = k if isinstance(k, BasisSet) else BasisSet(degree)
    rule = gauss_rule(opts.points_for(degree))
    phi, dphi, mass_1d, stiff_1d = _reference_matrices(basis, rule)

    logger.info("Assembling system: N=%d, k=%d, q=%d, eps=%g", mesh.n, degree, rule.count, p.epsilon)

    hx = mesh.mesh_x.steps[None, :]
    hy = mesh.mesh_y.steps[:, None]
    area = mesh.cell_areas()
    ratio = hy / hx

    X, Y, W = cell_quadrature(mesh, rule)
    try:
        b1 = _field(p.b1, X, Y)
        b2 = _field(p.b2, X, Y)
        c = _field(p.c, X, Y)
        f = _field(p.f, X, Y)
    except ValueError as e:
        raise ValueError(f"Coefficients of problem '{p.name}' could not be evaluated on the mesh: {e}") from e

    # local blocks indexed [j, i, b, a, d, c]: row node (a, b), column node (c, d)
    stiffness = (np.einsum("ji,ac,bd->jibadc", ratio, stiff_1d, mass_1d)
                 + np.einsum("ji,ac,bd->jibadc", 1.0 / ratio, mass_1d, stiff_1d))
    mass = np.einsum("ji,ac,bd->jibadc", area, mass_1d, mass_1d)
    reaction = np.einsum("jihg,ga,hb,gc,hd->jibadc", W * c, phi, phi, phi, phi, optimize=True)
    # d/dx brings 1/hx, d/dy brings 1/hy; W already carries hx*hy
    convection = -(
        np.einsum("jihg,ga,hb,gc,hd->jibadc", W * b1 / hx[:, :, None, None], phi, phi, dphi, phi, optimize=True)
        + np.einsum("jihg,ga,hb,gc,hd->jibadc", W * b2 / hy[:, :, None, None], phi, phi, phi, dphi, optimize=True)
    )
    load = np.einsum("jihg,ga,hb->jiba", W * f, phi, phi, optimize=True)

    n, size = mesh.n, (degree + 1) ** 2
    dof_index = dof_map.interior_index.ravel()[dof_map.cell_full_indices()]
    n_dofs = dof_map.n_interior

    def flat(block):
        return block.reshape(n, n, size, size)

    matrix = _scatter(flat(p.epsilon * stiffness + convection + reaction), dof_index, n_dofs, opts.deterministic)
    stiffness_matrix = _scatter(flat(stiffness), dof_index, n_dofs, opts.deterministic)
    mass_matrix = _scatter(flat(mass), dof_index, n_dofs, opts.deterministic)

    load = load.reshape(n, n, size)
    keep = dof_index >= 0
    rhs = np.bincount(dof_index[keep], weights=load[keep], minlength=n_dofs)

    logger.debug("Assembled %d dofs with %d nonzeros", n_dofs, matrix.nnz)
    return SparseSystem(matrix, rhs, dof_map, stiffness_matrix, mass_matrix, float(p.epsilon))


def _check_vector(sys: SparseSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n_dofs,):
        raise ValueError(f"Expected a vector of length {sys.n_dofs}, got shape {x.shape}.")
    return x


def apply_operator(sys: SparseSystem, x) -> np.ndarray:
    """Matrix-vector product A x."""
    return sys.matrix @ _check_vector(sys, x)


def discrete_energy_norm(sys: SparseSystem, v) -> float:
    """(eps v^T K v + v^T M v)^(1/2) of the finite element function with coefficients v."""
    v = _check_vector(sys, v)
    value = sys.epsilon * (v @ (sys.stiffness @ v)) + v @ (sys.mass @ v)
    return float(np.sqrt(max(value, 0.0)))


def dump_matrix(sys: SparseSystem, path) -> None:
    """Writes the system matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sys.matrix,
                     comment=f" layerkit system: N={sys.dof_map.mesh.n} k={sys.dof_map.degree} eps={sys.epsilon:g}")
    logger.info("Matrix written to %s", path)
