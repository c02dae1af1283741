"""
Finite element functions on Q_k spaces and the interpolation operators used
in the error analysis.

Main Functionalities
--------------------
1. `FemFunction`: nodal values over all (kN + 1)^2 nodes, evaluable with its
   gradient anywhere in the unit square.
2. `interpolate_standard`: Lagrange interpolation at the nodes.
3. `interpolate_pi`: the boundary-preserving interpolant

       Pi u = S^I + pi_1 E1 + pi_2 E2 + pi_12 E12,

   where each pi_* E* is the Lagrange interpolant of a layer component with
   its values on the last fine mesh line(s) set to zero (`PiSpec`).
4. `interp_stability_check`: compares cell maxima of the interpolated layer
   components with those of the components.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from layerkit.fespace import BasisSet, DofMap, build_dof_map
from layerkit.mesh import TensorMesh2D
from layerkit.problems import SolutionDecomposition

logger = logging.getLogger(__name__)

LAYER_COMPONENTS = ("E1", "E2", "E12")


@dataclass(frozen=True, eq=False)
class FemFunction:
    """
    Q_k finite element function given by its nodal values.

    Attributes
    ----------
    dof_map : DofMap
        Mesh, degree and node coordinates.
    values : numpy.ndarray
        Nodal values of shape (kN + 1, kN + 1) indexed [J, I], boundary
        included.
    """

    dof_map: DofMap
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        width = self.dof_map.nodes_per_direction
        if values.shape != (width, width):
            raise ValueError(f"Expected nodal values of shape {(width, width)}, got {values.shape}.")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_interior(cls, dof_map: DofMap, coefficients) -> "FemFunction":
        """Lifts interior coefficients (e.g. a linear solve's output) with zero boundary values."""
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (dof_map.n_interior,):
            raise ValueError(
                f"Expected {dof_map.n_interior} interior coefficients, got shape {coefficients.shape}."
            )
        width = dof_map.nodes_per_direction
        values = np.zeros((width, width))
        values[1:-1, 1:-1] = coefficients.reshape(width - 2, width - 2)
        return cls(dof_map, values)

    @property
    def mesh(self) -> TensorMesh2D:
        return self.dof_map.mesh

    @property
    def degree(self) -> int:
        return self.dof_map.degree

    def interior_coefficients(self) -> np.ndarray:
        return self.values[1:-1, 1:-1].ravel()

    def boundary_values(self) -> np.ndarray:
        v = self.values
        return np.concatenate([v[0, :], v[-1, :], v[1:-1, 0], v[1:-1, -1]])

    def cell_coefficients(self) -> np.ndarray:
        """Nodal values per cell, shape (N, N, k+1, k+1) indexed [j, i, b, a]."""
        cols, rows = self.dof_map.local_node_indices()
        return self.values[rows[:, None, :, None], cols[None, :, None, :]]

    def cell_values(self, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Value and gradient at the tensor points (t_g, t_h) of every cell.

        Returns
        -------
        value, dx, dy : numpy.ndarray
            Arrays of shape (N, N, len(t), len(t)) indexed [j, i, h, g].
        """
        basis = BasisSet(self.degree)
        phi, dphi = basis.evaluate(np.asarray(t, dtype=float))
        C = self.cell_coefficients()
        hx = self.mesh.mesh_x.steps[None, :, None, None]
        hy = self.mesh.mesh_y.steps[:, None, None, None]
        value = np.einsum("jiba,hb,ga->jihg", C, phi, phi, optimize=True)
        dx = np.einsum("jiba,hb,ga->jihg", C, phi, dphi, optimize=True) / hx
        dy = np.einsum("jiba,hb,ga->jihg", C, dphi, phi, optimize=True) / hy
        return value, dx, dy

    def _point_data(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
            raise ValueError("Evaluation points must lie in the closed unit square.")
        x, y = np.broadcast_arrays(x, y)
        mesh = self.mesh
        i, j = mesh.locate(x, y)
        hx = mesh.mesh_x.steps[i]
        hy = mesh.mesh_y.steps[j]
        tx = np.clip((x - mesh.mesh_x.points[i]) / hx, 0.0, 1.0)
        ty = np.clip((y - mesh.mesh_y.points[j]) / hy, 0.0, 1.0)
        basis = BasisSet(self.degree)
        phi_x, dphi_x = basis.evaluate(tx)
        phi_y, dphi_y = basis.evaluate(ty)
        C = self.cell_coefficients()[j, i]
        return C, phi_x, dphi_x, phi_y, dphi_y, hx, hy

    def evaluate(self, x, y) -> np.ndarray:
        """Values at arbitrary points of [0, 1]^2."""
        C, phi_x, _, phi_y, _, _, _ = self._point_data(x, y)
        return np.einsum("...ba,...b,...a->...", C, phi_y, phi_x)

    def gradient(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """Partial derivatives at arbitrary points, taken from the containing cell."""
        C, phi_x, dphi_x, phi_y, dphi_y, hx, hy = self._point_data(x, y)
        dx = np.einsum("...ba,...b,...a->...", C, phi_y, dphi_x) / hx
        dy = np.einsum("...ba,...b,...a->...", C, dphi_y, phi_x) / hy
        return dx, dy


@dataclass(frozen=True, eq=False)
class PiSpec:
    """
    Node-zeroing sets of the boundary-preserving interpolant, as boolean
    masks of shape (kN + 1, kN + 1) indexed [J, I].

    E1 : interior nodes on the lines x = x_{N/2-1}^s, s = 0..k-1.
    E2 : interior nodes on the lines y = y_{N/2-1}^t, t = 0..k-1.
    E12 : the k^2 nodes (x_{N/2-1}^s, y_{N/2-1}^t).
    """

    E1: np.ndarray
    E2: np.ndarray
    E12: np.ndarray

    @classmethod
    def from_dof_map(cls, dof_map: DofMap) -> "PiSpec":
        k, n = dof_map.degree, dof_map.mesh.n
        width = dof_map.nodes_per_direction
        strip = k * (n // 2 - 1) + np.arange(k)
        on_strip = np.zeros(width, dtype=bool)
        on_strip[strip] = True
        interior = np.zeros(width, dtype=bool)
        interior[1:-1] = True

        e1 = interior[:, None] & on_strip[None, :]
        e2 = on_strip[:, None] & interior[None, :]
        e12 = on_strip[:, None] & on_strip[None, :]
        for mask in (e1, e2, e12):
            mask.setflags(write=False)
        return cls(e1, e2, e12)

    def mask(self, component: str) -> Optional[np.ndarray]:
        return getattr(self, component) if component in LAYER_COMPONENTS else None


def _node_grid(dof_map: DofMap):
    return np.meshgrid(dof_map.x_nodes, dof_map.y_nodes)


def interpolate_standard(g, mesh: TensorMesh2D, k: int) -> FemFunction:
    """
    Lagrange interpolant of g: the coefficient at every node (x_i^s, y_j^t)
    equals g there.
    """
    dof_map = build_dof_map(mesh, k)
    X, Y = _node_grid(dof_map)
    values = np.broadcast_to(np.asarray(g(X, Y), dtype=float), X.shape)
    return FemFunction(dof_map, values)


def interpolate_pi_components(dec: SolutionDecomposition, mesh: TensorMesh2D,
                              k: int) -> Dict[str, FemFunction]:
    """S^I, pi_1 E1, pi_2 E2 and pi_12 E12 as separate finite element functions."""
    if dec is None:
        raise ValueError("The boundary-preserving interpolant needs a solution decomposition.")
    dof_map = build_dof_map(mesh, k)
    zeroing = PiSpec.from_dof_map(dof_map)
    X, Y = _node_grid(dof_map)

    parts = {}
    for name, field in dec.components().items():
        values = np.array(np.broadcast_to(field(X, Y), X.shape), dtype=float)
        mask = zeroing.mask(name)
        if mask is not None:
            values[mask] = 0.0
        parts[name] = FemFunction(dof_map, values)
    return parts


def interpolate_pi(dec: SolutionDecomposition, mesh: TensorMesh2D, k: int) -> FemFunction:
    """
    Boundary-preserving interpolant Pi u.

    Its nodal values vanish on the boundary and agree with
    S + E1 + E2 + E12 at every node outside the zeroing sets of `PiSpec`.

    Raises
    ------
    ValueError
        If no decomposition is given.
    """
    parts = interpolate_pi_components(dec, mesh, k)
    # same grouping as SolutionDecomposition.value keeps the y = 0 edge exactly zero
    values = (parts["S"].values + parts["E2"].values) + (parts["E1"].values + parts["E12"].values)
    pi_u = FemFunction(parts["S"].dof_map, values)
    logger.debug("Pi interpolant: max boundary value %g", np.abs(pi_u.boundary_values()).max())
    return pi_u


@dataclass(frozen=True)
class StabilityReport:
    """
    Worst cell ratios max|interpolant| / max|component| per layer component.

    Attributes
    ----------
    table : pandas.DataFrame
        One row per (component, interpolant) with the worst ratio and the
        cell (i, j) where it occurs.
    worst : float
        Largest ratio in the table.
    """

    table: pd.DataFrame
    worst: float

    def bounded(self, tol: float = 1e-12) -> bool:
        return self.worst <= 1.0 + tol


def _cell_points(mesh: TensorMesh2D, t: np.ndarray):
    # convex combination hits both cell edges exactly
    xl, xr = mesh.mesh_x.points[:-1], mesh.mesh_x.points[1:]
    yl, yr = mesh.mesh_y.points[:-1], mesh.mesh_y.points[1:]
    x = xl[:, None] * (1.0 - t[None, :]) + xr[:, None] * t[None, :]
    y = yl[:, None] * (1.0 - t[None, :]) + yr[:, None] * t[None, :]
    return x[None, :, None, :], y[:, None, :, None]


def _cell_ratio(interp_max: np.ndarray, exact_max: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = interp_max / exact_max
    ratio[(exact_max == 0) & (interp_max == 0)] = 0.0
    ratio[(exact_max == 0) & (interp_max > 0)] = np.inf
    return ratio


def interp_stability_check(dec: SolutionDecomposition, mesh: TensorMesh2D, k: int,
                           samples: int = 5) -> StabilityReport:
    """
    For every cell and layer component compares max |E^I| and max |pi E| over
    a samples x samples grid with max |E| over a denser grid containing the
    nodes.

    Parameters
    ----------
    dec : SolutionDecomposition
    mesh : TensorMesh2D
    k : int
        Polynomial degree.
    samples : int
        Sample points per cell and direction for the interpolants, at least 2.

    Returns
    -------
    StabilityReport
    """
    if samples < 2:
        raise ValueError("At least 2 samples per direction are needed.")
    t = np.linspace(0.0, 1.0, samples)
    dense = np.linspace(0.0, 1.0, (samples - 1) * 4 + 1)
    # the node positions s/k must be part of the dense grid
    dense = np.union1d(dense, np.linspace(0.0, 1.0, k + 1))
    X, Y = _cell_points(mesh, dense)

    standard = {name: interpolate_standard(field, mesh, k) for name, field in dec.components().items()}
    modified = interpolate_pi_components(dec, mesh, k)

    rows = []
    for name in LAYER_COMPONENTS:
        exact_max = np.abs(np.broadcast_to(dec.components()[name](X, Y), (mesh.n, mesh.n, dense.size, dense.size)))
        exact_max = exact_max.max(axis=(2, 3))
        for kind, interpolant in (("standard", standard[name]), ("pi", modified[name])):
            interp_max = np.abs(interpolant.cell_values(t)[0]).max(axis=(2, 3))
            ratio = _cell_ratio(interp_max, exact_max)
            j, i = np.unravel_index(np.argmax(ratio), ratio.shape)
            rows.append({
                "component": name,
                "interpolant": kind,
                "worst_ratio": float(ratio[j, i]),
                "cell_i": int(i),
                "cell_j": int(j),
            })
    table = pd.DataFrame(rows)
    worst = float(table["worst_ratio"].max())
    if worst > 1.0 + 1e-12:
        logger.warning("Interpolant exceeds the component maximum on a cell: worst ratio %.6g", worst)
    return StabilityReport(table, worst)
