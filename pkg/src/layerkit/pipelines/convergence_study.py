import logging
import time
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from layerkit.analysis import ConvergenceTable, ErrorNorms, error_norms, pi_error
from layerkit.assembly import AssemblyOptions, SparseSystem, assemble_system
from layerkit.interpolant import FemFunction, interpolate_standard
from layerkit.linsolve import SolveOptions, SolveStats, SolverNotConvergedError, solve
from layerkit.mesh import MeshConfig, TensorMesh2D, tensor_mesh
from layerkit.problems import ExactSolution, get_problem

logger = logging.getLogger(__name__)

NORMS = ("energy", "l2", "h1_semi", "linf_quad")


def _check_lists(eps_list: Sequence[float], n_list: Sequence[int]):
    if len(eps_list) == 0 or len(n_list) == 0:
        raise ValueError("eps_list and n_list must not be empty.")


def _mesh_configs(n: int, eps: float, sigma: float, beta_pair: Tuple[float, float],
                  allow_large_eps: bool) -> Tuple[MeshConfig, MeshConfig]:
    return (MeshConfig(n, eps, sigma, beta_pair[0], allow_large_eps),
            MeshConfig(n, eps, sigma, beta_pair[1], allow_large_eps))


class SolveConvergenceStudy:
    """
    Solves a problem on Bakhvalov-type meshes for every (epsilon, N) pair and
    collects the errors of the discrete solutions against the exact solution.

    A cell that fails (mesh, assembly, solve or error evaluation) is recorded
    with its failure message; the remaining cells still run.
    """

    def __init__(self, k: int, sigma: Optional[float] = None, beta_pair: Tuple[float, float] = (2.0, 1.0),
                 eps_list: Sequence[float] = (1e-4,), n_list: Sequence[int] = (8, 16, 32),
                 solver_opts: Optional[SolveOptions] = None, problem: str = "paper-example",
                 problem_params: Optional[Dict[str, float]] = None,
                 assembly_opts: Optional[AssemblyOptions] = None, q_err: Optional[int] = None,
                 norms: Iterable[str] = ("energy",), fallback_direct: bool = False,
                 allow_large_eps: bool = False, progress: bool = True, err_subdivisions: int = 1):
        """
        Parameters:
            k (int): Polynomial degree.
            sigma (float, optional): Mesh grading exponent, k + 1 when None.
            beta_pair (tuple): Mesh decay constants (beta_x, beta_y).
            eps_list (Sequence[float]): Perturbation parameters.
            n_list (Sequence[int]): Numbers of cells per direction.
            solver_opts (SolveOptions, optional): Linear solver settings.
            problem (str): Registered problem name; it must have an exact solution.
            problem_params (dict, optional): Extra parameters for the problem factory.
            assembly_opts (AssemblyOptions, optional): Quadrature for assembly.
            q_err (int, optional): Gauss points per direction for the error norms.
            norms (Iterable[str]): Norms recorded in the table.
            fallback_direct (bool): Re-solve with the banded direct solver when GMRES does not converge.
            allow_large_eps (bool): Accept epsilon > 1/N.
            progress (bool): Show a progress bar.
            err_subdivisions (int): Composite Gauss parts per cell and direction for the error norms.
        """
        _check_lists(eps_list, n_list)
        self.norms = tuple(norms)
        unknown = [norm for norm in self.norms if norm not in NORMS]
        if unknown:
            raise ValueError(f"Unknown norms {unknown}. Supported norms are: {', '.join(NORMS)}.")
        if not allow_large_eps:
            bad = [(eps, n) for eps in eps_list for n in n_list if eps > 1.0 / n]
            if bad:
                raise ValueError(f"Cells with epsilon > 1/N: {bad}; pass allow_large_eps=True to run them.")

        self.k = k
        self.sigma = float(k + 1 if sigma is None else sigma)
        self.beta_pair = (float(beta_pair[0]), float(beta_pair[1]))
        self.eps_list = [float(eps) for eps in eps_list]
        self.n_list = [int(n) for n in n_list]
        self.solver_opts = solver_opts or SolveOptions()
        self.solver_opts.validate()
        self.problem = problem
        self.problem_params = dict(problem_params or {})
        self.assembly_opts = assembly_opts or AssemblyOptions()
        self.q_err = q_err
        self.err_subdivisions = err_subdivisions
        self.fallback_direct = fallback_direct
        self.allow_large_eps = allow_large_eps
        self.progress = progress
        self.build_problem(self.eps_list[0])
        logger.info("Convergence study initialized: k=%d, sigma=%g, beta=%s, %d cells",
                    k, self.sigma, self.beta_pair, len(self.eps_list) * len(self.n_list))

    @property
    def metadata(self) -> Dict[str, object]:
        return {
            "study": "solve",
            "problem": self.problem,
            "k": self.k,
            "sigma": self.sigma,
            "beta": list(self.beta_pair),
            "solver": self.solver_opts.method,
            "precondition": self.solver_opts.precondition,
            "restart": self.solver_opts.restart,
            "rel_tol": self.solver_opts.rel_tol,
            "q": self.assembly_opts.points_for(self.k),
            "q_err": self.k + 3 if self.q_err is None else self.q_err,
            "err_subdivisions": self.err_subdivisions,
        }

    def build_mesh(self, eps: float, n: int) -> TensorMesh2D:
        try:
            cfg_x, cfg_y = _mesh_configs(n, eps, self.sigma, self.beta_pair, self.allow_large_eps)
            return tensor_mesh(cfg_x, cfg_y)
        except Exception as e:
            raise RuntimeError(f"Error building the mesh: {e}") from e

    def build_problem(self, eps: float):
        problem, exact = get_problem(self.problem, eps, **self.problem_params)
        if exact is None:
            raise ValueError(f"Problem '{self.problem}' has no exact solution to measure errors against.")
        return problem, exact

    def assemble(self, mesh: TensorMesh2D, problem) -> SparseSystem:
        try:
            return assemble_system(mesh, self.k, problem, self.assembly_opts)
        except Exception as e:
            raise RuntimeError(f"Error assembling the system: {e}") from e

    def solve_system(self, system: SparseSystem) -> Tuple[np.ndarray, SolveStats]:
        """Solves with the configured solver; falls back to the direct solver if enabled."""
        try:
            return solve(system, self.solver_opts)
        except SolverNotConvergedError as e:
            if not self.fallback_direct or self.solver_opts.method == "direct":
                raise RuntimeError(f"Error solving the system: {e}") from e
            logger.warning("GMRES did not converge (%s); re-solving with the direct solver.", e.stats)
        except Exception as e:
            raise RuntimeError(f"Error solving the system: {e}") from e
        try:
            return solve(system, SolveOptions(method="direct"))
        except Exception as e:
            raise RuntimeError(f"Error solving the system with the direct fallback: {e}") from e

    def measure(self, x: np.ndarray, system: SparseSystem, exact: ExactSolution, eps: float) -> ErrorNorms:
        try:
            uh = FemFunction.from_interior(system.dof_map, x)
            return error_norms(uh, exact, q_err=self.q_err, epsilon=eps,
                               subdivisions=self.err_subdivisions)
        except Exception as e:
            raise RuntimeError(f"Error computing error norms: {e}") from e

    def run_cell(self, eps: float, n: int) -> List[Dict[str, object]]:
        """Records of one (epsilon, N) cell, one per norm."""
        base = {"epsilon": eps, "N": n}
        try:
            problem, exact = self.build_problem(eps)
            mesh = self.build_mesh(eps, n)
            system = self.assemble(mesh, problem)
            x, stats = self.solve_system(system)
            errors = self.measure(x, system, exact, eps).as_dict()
        except Exception as e:
            logger.warning("Cell eps=%g N=%d failed: %s", eps, n, e)
            return [dict(base, norm=norm, error=np.nan, status=f"failed: {e}") for norm in self.norms]

        logger.info("Cell eps=%g N=%d: energy error %.3e (%s)", eps, n, errors["energy"], stats)
        return [
            dict(base, norm=norm, error=errors[norm], status="ok", solver=stats.method,
                 iterations=stats.iterations, residual=stats.relative_residual, seconds=stats.seconds)
            for norm in self.norms
        ]

    def run(self) -> ConvergenceTable:
        """
        Runs all cells in (epsilon, N) order.

        Returns:
            ConvergenceTable: Errors and observed orders per (epsilon, N, norm).
        """
        start = time.perf_counter()
        cells = [(eps, n) for eps in self.eps_list for n in self.n_list]
        records = []
        for eps, n in tqdm(cells, desc="Convergence study", unit="cells", disable=not self.progress):
            records.extend(self.run_cell(eps, n))
        table = ConvergenceTable.from_records(records, self.metadata)
        logger.info("Convergence study finished in %.2f seconds with %d failed cells.",
                    time.perf_counter() - start, len(table.failed) // max(len(self.norms), 1))
        return table


class InterpConvergenceStudy:
    """
    Interpolation errors of the solution components for a sequence of N:
    L2 and energy norms of E - E^I for the layer components, the L2 norm of
    S - S^I and the energy norm of u - Pi u.
    """

    def __init__(self, k: int, sigma: Optional[float] = None, beta_pair: Tuple[float, float] = (2.0, 1.0),
                 eps: float = 1e-6, n_list: Sequence[int] = (8, 16, 32, 64), problem: str = "paper-example",
                 q_err: Optional[int] = None, allow_large_eps: bool = False, progress: bool = True,
                 err_subdivisions: int = 1):
        _check_lists([eps], n_list)
        self.k = k
        self.sigma = float(k + 1 if sigma is None else sigma)
        self.beta_pair = (float(beta_pair[0]), float(beta_pair[1]))
        self.eps = float(eps)
        self.n_list = [int(n) for n in n_list]
        self.problem = problem
        self.q_err = q_err
        self.err_subdivisions = err_subdivisions
        self.allow_large_eps = allow_large_eps
        self.progress = progress

        _, exact = get_problem(problem, self.eps)
        if exact is None or exact.decomposition is None:
            raise ValueError(f"Problem '{problem}' provides no solution decomposition.")
        self.decomposition = exact.decomposition

    @property
    def metadata(self) -> Dict[str, object]:
        return {
            "study": "interpolation",
            "problem": self.problem,
            "k": self.k,
            "sigma": self.sigma,
            "beta": list(self.beta_pair),
            "q_err": self.k + 3 if self.q_err is None else self.q_err,
            "err_subdivisions": self.err_subdivisions,
        }

    def build_mesh(self, n: int) -> TensorMesh2D:
        try:
            cfg_x, cfg_y = _mesh_configs(n, self.eps, self.sigma, self.beta_pair, self.allow_large_eps)
            return tensor_mesh(cfg_x, cfg_y)
        except Exception as e:
            raise RuntimeError(f"Error building the mesh: {e}") from e

    def norm_names(self) -> List[str]:
        """Table rows recorded per N, in the order of `component_errors`."""
        names = []
        for name in self.decomposition.components():
            names.append(f"{name}_l2")
            if name != "S":
                names.append(f"{name}_energy")
        return names + ["pi_energy"]

    def component_errors(self, mesh: TensorMesh2D) -> Dict[str, float]:
        try:
            errors = {}
            for name, field in self.decomposition.components().items():
                norms = error_norms(interpolate_standard(field, mesh, self.k), field,
                                    q_err=self.q_err, epsilon=self.eps, subdivisions=self.err_subdivisions)
                errors[f"{name}_l2"] = norms.l2
                if name != "S":
                    errors[f"{name}_energy"] = norms.energy
            errors["pi_energy"] = pi_error(self.decomposition, mesh, self.k, self.eps, self.q_err,
                                           self.err_subdivisions).energy
            return errors
        except Exception as e:
            raise RuntimeError(f"Error computing interpolation errors: {e}") from e

    def run(self) -> ConvergenceTable:
        records = []
        for n in tqdm(self.n_list, desc="Interpolation study", unit="meshes", disable=not self.progress):
            base = {"epsilon": self.eps, "N": n}
            try:
                errors = self.component_errors(self.build_mesh(n))
            except Exception as e:
                logger.warning("Interpolation study failed for N=%d: %s", n, e)
                records.extend(dict(base, norm=name, error=np.nan, status=f"failed: {e}") for name in self.norm_names())
                continue
            records.extend(dict(base, norm=name, error=value, status="ok") for name, value in errors.items())
        table = ConvergenceTable.from_records(records, self.metadata)
        # keep the column order of component_errors for the wide layout
        order = {name: i for i, name in enumerate(dict.fromkeys(r["norm"] for r in records))}
        table.data = table.data.sort_values(["N", "norm"], key=lambda s: s.map(order) if s.name == "norm" else s,
                                            kind="mergesort").reset_index(drop=True)
        return table


def solve_convergence_study(k: int, sigma: Optional[float], beta_pair: Tuple[float, float],
                            eps_list: Sequence[float], n_list: Sequence[int],
                            solver_opts: Optional[SolveOptions] = None, **kwargs) -> ConvergenceTable:
    """Runs a `SolveConvergenceStudy`; keyword arguments are passed to its constructor."""
    return SolveConvergenceStudy(k, sigma, beta_pair, eps_list, n_list, solver_opts, **kwargs).run()


def interp_convergence_study(k: int, sigma: Optional[float], beta_pair: Tuple[float, float], eps: float,
                             n_list: Sequence[int], **kwargs) -> ConvergenceTable:
    """Runs an `InterpConvergenceStudy`; keyword arguments are passed to its constructor."""
    return InterpConvergenceStudy(k, sigma, beta_pair, eps, n_list, **kwargs).run()
