"""
Bakhvalov-type layer-adapted meshes on the unit interval and their tensor
products on the unit square.

The one-dimensional mesh is logarithmically graded on [0, x_{N/2}] and
uniform on [x_{N/2}, 1]:

    x_i = -(sigma * eps / beta) * ln(1 - 2 (1 - eps) i / N)      i <= N/2
    x_i = 1 - 2 (1 - x_{N/2}) (N - i) / N                         i >  N/2

The transition point x_{N/2} = -(sigma * eps / beta) * ln(eps) does not
depend on N.

Main Functionalities
--------------------
1. Build the graded point set for one direction (`bakhvalov_points`).
2. Combine two directions into a rectangulation of (0, 1)^2 (`tensor_mesh`).
3. Report the step-size properties the convergence theory relies on
   (`mesh_report`).

Examples
--------
>>> cfg = MeshConfig(n=8, epsilon=0.01, sigma=2.0, beta=1.0)
>>> mesh = bakhvalov_points(cfg)
>>> round(mesh.points[4], 6)
0.092103
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeshConfig:
    """
    Parameters of a Bakhvalov-type mesh in one direction.

    Attributes
    ----------
    n : int
        Number of cells, even and at least 4.
    epsilon : float
        Perturbation parameter, 0 < epsilon <= 1/n unless `allow_large_eps`.
    sigma : float
        Grading exponent, sigma >= 1.
    beta : float
        Layer decay constant used by the mesh in this direction, beta > 0.
    allow_large_eps : bool
        Accept epsilon > 1/n for exploratory runs. The mesh stays well
        defined but the step-size bounds are no longer guaranteed.
    """

    n: int
    epsilon: float
    sigma: float = 2.0
    beta: float = 1.0
    allow_large_eps: bool = False

    def validate(self):
        """
        Checks the configuration.

        Raises
        ------
        TypeError
            If n is not an integer.
        ValueError
            If any parameter is out of range.
        """
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise TypeError("The number of cells n must be an integer.")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"The number of cells must be even and at least 4, got n={self.n}.")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}.")
        if self.epsilon >= 1:
            raise ValueError(f"epsilon must be smaller than 1, got {self.epsilon}.")
        if self.epsilon > 1.0 / self.n and not self.allow_large_eps:
            raise ValueError(
                f"epsilon={self.epsilon} exceeds 1/N={1.0 / self.n}; "
                "pass allow_large_eps=True (--allow-large-eps) to build the mesh anyway."
            )
        if not self.sigma >= 1:
            raise ValueError(f"sigma must be at least 1, got {self.sigma}.")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}.")

    @property
    def transition_point(self) -> float:
        """x_{N/2} = -(sigma * eps / beta) * ln(eps)."""
        return -(self.sigma * self.epsilon / self.beta) * math.log(self.epsilon)


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """
    Ordered mesh points x_0 = 0 < x_1 < ... < x_N = 1 and cell steps
    h_i = x_{i+1} - x_i. Both arrays are read-only.
    """

    points: np.ndarray
    steps: np.ndarray = field(init=False)

    def __post_init__(self):
        points = _frozen(self.points)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("A mesh needs at least two points.")
        if points[0] != 0.0 or points[-1] != 1.0:
            raise ValueError("Mesh points must start at 0 and end at 1.")
        steps = np.diff(points)
        if np.any(steps <= 0):
            raise ValueError("Mesh points must be strictly increasing.")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "steps", _frozen(steps))

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.points.size - 1

    def to_text(self) -> str:
        """One line per point: `<index> <coordinate>` with 17 significant digits."""
        return "\n".join(f"{i} {x:.17g}" for i, x in enumerate(self.points)) + "\n"


@dataclass(frozen=True, eq=False)
class TensorMesh2D:
    """Rectangulation of (0, 1)^2 with cells K_ij = [x_i, x_{i+1}] x [y_j, y_{j+1}]."""

    mesh_x: Mesh1D
    mesh_y: Mesh1D

    def __post_init__(self):
        if self.mesh_x.n != self.mesh_y.n:
            raise ValueError(
                f"Both directions must have the same number of cells, "
                f"got {self.mesh_x.n} and {self.mesh_y.n}."
            )

    @property
    def n(self) -> int:
        return self.mesh_x.n

    @property
    def n_cells(self) -> int:
        return self.mesh_x.n * self.mesh_y.n

    def cell_areas(self) -> np.ndarray:
        """Areas h_{y,j} * h_{x,i}, indexed [j, i]."""
        return np.outer(self.mesh_y.steps, self.mesh_x.steps)

    def locate(self, x, y):
        """
        Cell indices (i, j) containing the points (x, y). Points on an
        interior mesh line are assigned to the cell on their right/top;
        points on x = 1 or y = 1 go to the last cell.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        i = np.clip(np.searchsorted(self.mesh_x.points, x, side="right") - 1, 0, self.n - 1)
        j = np.clip(np.searchsorted(self.mesh_y.points, y, side="right") - 1, 0, self.n - 1)
        return i, j


@dataclass(frozen=True)
class MeshReport:
    """
    Step-size diagnostics of a Bakhvalov-type mesh.

    Attributes
    ----------
    h0_over_epsN : float
        h_0 / (eps / N).
    fine_monotone : bool
        True iff h_0 <= h_1 <= ... <= h_{N/2-2}.
    coarse_min, coarse_max : float
        Extremes of h_i * N over the uniform part i = N/2, ..., N-1.
    transition_value : float
        x_{N/2}.
    layer_width_value : float
        exp(-beta * x_{N/2-1} / eps).
    transition_decay : float
        exp(-beta * x_{N/2} / eps), equal to eps^sigma.
    h_penultimate_over_sigma_eps : float
        h_{N/2-2} / (sigma * eps), expected in [1/4, 1].
    h_last_fine_scaled : float
        h_{N/2-1} / (sigma * eps), expected at least 1/2.
    h_last_fine_times_n : float
        h_{N/2-1} * N, expected at most 2 * sigma.
    """

    h0_over_epsN: float
    fine_monotone: bool
    coarse_min: float
    coarse_max: float
    transition_value: float
    layer_width_value: float
    transition_decay: float
    h_penultimate_over_sigma_eps: float
    h_last_fine_scaled: float
    h_last_fine_times_n: float

    def to_series(self) -> pd.Series:
        return pd.Series(self.__dict__)

    def to_text(self) -> str:
        """Aligned `key: value` lines."""
        width = max(len(key) for key in self.__dict__)
        lines = []
        for key, value in self.__dict__.items():
            shown = value if isinstance(value, (bool, np.bool_)) else f"{value:.17g}"
            lines.append(f"{key.ljust(width)}: {shown}")
        return "\n".join(lines) + "\n"


def bakhvalov_points(cfg: MeshConfig) -> Mesh1D:
    """
    Builds the Bakhvalov-type mesh for one direction.

    Parameters
    ----------
    cfg : MeshConfig
        Mesh parameters.

    Returns
    -------
    Mesh1D
        The N + 1 mesh points and their steps.

    Raises
    ------
    ValueError
        If the configuration is invalid or the transition point does not lie
        inside (0, 1).
    """
    cfg.validate()
    n, eps = cfg.n, cfg.epsilon
    half = n // 2
    scale = cfg.sigma * eps / cfg.beta

    transition = cfg.transition_point
    if not 0 < transition < 1:
        raise ValueError(
            f"Transition point x_N/2={transition:.6g} lies outside (0, 1); "
            "reduce sigma or increase beta."
        )

    points = np.empty(n + 1)
    i_fine = np.arange(half)
    points[:half] = -scale * np.log(1.0 - 2.0 * (1.0 - eps) * i_fine / n)
    points[0] = 0.0
    points[half] = transition
    i_coarse = np.arange(half + 1, n + 1)
    points[half + 1:] = 1.0 - 2.0 * (1.0 - transition) * (n - i_coarse) / n

    logger.debug("Bakhvalov mesh N=%d eps=%g sigma=%g beta=%g transition=%.6g",
                 n, eps, cfg.sigma, cfg.beta, transition)
    return Mesh1D(points)


def tensor_mesh(cfg_x: MeshConfig, cfg_y: MeshConfig) -> TensorMesh2D:
    """
    Builds the tensor-product mesh from one configuration per direction.

    Raises
    ------
    ValueError
        If the two configurations do not share N.
    """
    if cfg_x.n != cfg_y.n:
        raise ValueError(f"Mismatched N: x-direction has {cfg_x.n}, y-direction has {cfg_y.n}.")
    return TensorMesh2D(bakhvalov_points(cfg_x), bakhvalov_points(cfg_y))


def mesh_report(mesh: Mesh1D, cfg: MeshConfig) -> MeshReport:
    """
    Computes the step-size diagnostics of a mesh built with `cfg`.

    Every field is computed from the mesh points; `cfg` only supplies the
    scalings eps, sigma and beta.
    """
    n, eps = mesh.n, cfg.epsilon
    half = n // 2
    h = mesh.steps
    fine = h[: half - 1]
    coarse = h[half:] * n

    return MeshReport(
        h0_over_epsN=float(h[0] / (eps / n)),
        fine_monotone=bool(np.all(np.diff(fine) >= 0)),
        coarse_min=float(coarse.min()),
        coarse_max=float(coarse.max()),
        transition_value=float(mesh.points[half]),
        layer_width_value=float(np.exp(-cfg.beta * mesh.points[half - 1] / eps)),
        transition_decay=float(np.exp(-cfg.beta * mesh.points[half] / eps)),
        h_penultimate_over_sigma_eps=float(h[half - 2] / (cfg.sigma * eps)),
        h_last_fine_scaled=float(h[half - 1] / (cfg.sigma * eps)),
        h_last_fine_times_n=float(h[half - 1] * n),
    )
