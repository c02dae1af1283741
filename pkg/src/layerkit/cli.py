"""
Command-line interface.

Subcommands
-----------
mesh          dump a Bakhvalov-type mesh and its step-size report
converge      solve convergence study over (epsilon, N)
interp-check  interpolation error rates of the solution components
solve         assemble and solve a single (epsilon, N) cell
assumptions   check the coefficient bounds of a problem

Every flag can also be given in a `key = value` file passed with
`--config`; flags on the command line take precedence.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from layerkit.analysis import FORMATS, emit_table, error_norms
from layerkit.assembly import AssemblyOptions, assemble_system, dump_matrix
from layerkit.config import load_config
from layerkit.interpolant import FemFunction, interp_stability_check
from layerkit.linsolve import METHODS, PRECONDITIONERS, SolveOptions, solve
from layerkit.mesh import MeshConfig, bakhvalov_points, mesh_report, tensor_mesh
from layerkit.pipelines import InterpConvergenceStudy, SolveConvergenceStudy
from layerkit.problems import get_problem, list_problems, verify_assumptions
from layerkit.utils import parse_float_list, parse_int_list

logger = logging.getLogger("layerkit")

DEFAULT_BETA = {"x": 2.0, "y": 1.0}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _add_mesh_pair_args(parser: argparse.ArgumentParser):
    parser.add_argument("--k", type=int, default=1, help="Polynomial degree (default: 1).")
    parser.add_argument("--sigma", type=float, default=None, help="Mesh grading exponent (default: k + 1).")
    parser.add_argument("--beta-x", type=float, default=DEFAULT_BETA["x"], help="Mesh decay constant in x.")
    parser.add_argument("--beta-y", type=float, default=DEFAULT_BETA["y"], help="Mesh decay constant in y.")
    parser.add_argument("--allow-large-eps", action="store_true", help="Accept epsilon > 1/N.")


def _add_problem_args(parser: argparse.ArgumentParser):
    parser.add_argument("--problem", default="paper-example", choices=list_problems())
    for name in ("b1", "b2", "c", "source"):
        parser.add_argument(f"--{name}", type=float, default=None,
                            help=f"Constant '{name}' for the constant-coefficients problem.")


def _add_solver_args(parser: argparse.ArgumentParser):
    parser.add_argument("--solver", default="gmres", choices=METHODS)
    parser.add_argument("--tol", type=float, default=1e-12, help="GMRES relative residual target.")
    parser.add_argument("--restart", type=int, default=50, help="GMRES restart length.")
    parser.add_argument("--max-iters", type=int, default=None, help="GMRES iteration cap (default: 10 * dofs).")
    parser.add_argument("--precond", default="ilu0", choices=PRECONDITIONERS)
    parser.add_argument("--q", type=int, default=None, help="Assembly Gauss points per direction (default: k + 2).")
    parser.add_argument("--q-err", type=int, default=None, help="Error-norm Gauss points per direction (default: k + 3).")
    parser.add_argument("--err-subdivisions", type=int, default=1,
                        help="Composite Gauss parts per cell and direction for the error norms.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerkit",
        allow_abbrev=False,
        description="Finite elements on Bakhvalov-type meshes for singularly perturbed convection-diffusion problems.",
    )
    parser.add_argument("--config", default=None, help="key = value file with default flag values.")
    parser.add_argument("--log-level", default="WARNING", type=str.upper, choices=LOG_LEVELS)
    commands = parser.add_subparsers(dest="command", required=True)

    mesh = commands.add_parser("mesh", allow_abbrev=False, help="Dump a one-dimensional Bakhvalov-type mesh.")
    mesh.add_argument("--n", type=int, required=True, help="Number of cells (even, at least 4).")
    mesh.add_argument("--eps", type=float, required=True)
    mesh.add_argument("--sigma", type=float, default=2.0)
    mesh.add_argument("--beta", type=float, default=None, help="Decay constant (default: 2 for x, 1 for y).")
    mesh.add_argument("--axis", choices=("x", "y"), default="x")
    mesh.add_argument("--report", action="store_true", help="Print the step-size report after the points.")
    mesh.add_argument("--allow-large-eps", action="store_true")
    mesh.set_defaults(handler=run_mesh)

    converge = commands.add_parser("converge", allow_abbrev=False, help="Energy-norm convergence study.")
    _add_mesh_pair_args(converge)
    _add_problem_args(converge)
    _add_solver_args(converge)
    converge.add_argument("--eps", default="1e-4,1e-5,1e-6,1e-7,1e-8", help="Comma-separated epsilon values.")
    converge.add_argument("--n", default="8,16,32,64", help="Comma-separated N values.")
    converge.add_argument("--norms", default="energy", help="Comma-separated norms: energy, l2, h1_semi, linf_quad.")
    converge.add_argument("--format", default="text", choices=FORMATS)
    converge.add_argument("--out", default=None, help="Write the table as CSV to this file.")
    converge.add_argument("--text", action="store_true", help="Also print the table when --out is given.")
    converge.add_argument("--fallback-direct", action="store_true",
                          help="Re-solve with the direct solver when GMRES does not converge.")
    converge.add_argument("--no-progress", action="store_true")
    converge.set_defaults(handler=run_converge)

    interp = commands.add_parser("interp-check", allow_abbrev=False,
                                 help="Interpolation error rates of the solution components.")
    _add_mesh_pair_args(interp)
    interp.add_argument("--problem", default="paper-example", choices=list_problems())
    interp.add_argument("--eps", type=float, default=1e-6)
    interp.add_argument("--n-list", default="8,16,32,64")
    interp.add_argument("--q-err", type=int, default=None)
    interp.add_argument("--err-subdivisions", type=int, default=1)
    interp.add_argument("--format", default="wide", choices=FORMATS)
    interp.add_argument("--out", default=None, help="Write the table as CSV to this file.")
    interp.add_argument("--stability", action="store_true", help="Also run the cell max-norm stability check.")
    interp.add_argument("--samples", type=int, default=5, help="Samples per cell and direction for --stability.")
    interp.add_argument("--no-progress", action="store_true")
    interp.set_defaults(handler=run_interp_check)

    single = commands.add_parser("solve", allow_abbrev=False, help="Assemble and solve one (epsilon, N) cell.")
    _add_mesh_pair_args(single)
    _add_problem_args(single)
    _add_solver_args(single)
    single.add_argument("--eps", type=float, default=1e-4)
    single.add_argument("--n", type=int, default=8)
    single.add_argument("--dump-matrix", default=None, help="Write the matrix in Matrix Market format.")
    single.add_argument("--dump-dofs", default=None, help="Write 'index x y' lines for the interior nodes.")
    single.set_defaults(handler=run_solve)

    assumptions = commands.add_parser("assumptions", allow_abbrev=False,
                                      help="Check b1 >= beta1, b2 >= beta2, c + div(b)/2 >= gamma.")
    _add_problem_args(assumptions)
    assumptions.add_argument("--eps", type=float, default=1e-4)
    assumptions.add_argument("--grid", type=int, default=101)
    assumptions.set_defaults(handler=run_assumptions)

    return parser


def _problem_params(args) -> Dict[str, float]:
    return {name: getattr(args, name) for name in ("b1", "b2", "c", "source") if getattr(args, name) is not None}


def _solver_options(args) -> SolveOptions:
    return SolveOptions(method=args.solver, restart=args.restart, rel_tol=args.tol,
                        max_iters=args.max_iters, precondition=args.precond)


def _names(value) -> List[str]:
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    return [str(item).strip() for item in items if str(item).strip()]


def _sigma(args) -> float:
    return float(args.k + 1 if args.sigma is None else args.sigma)


def run_mesh(args) -> int:
    beta = DEFAULT_BETA[args.axis] if args.beta is None else args.beta
    cfg = MeshConfig(args.n, args.eps, args.sigma, beta, args.allow_large_eps)
    mesh = bakhvalov_points(cfg)
    sys.stdout.write(mesh.to_text())
    if args.report:
        sys.stdout.write(mesh_report(mesh, cfg).to_text())
    return 0


def run_converge(args) -> int:
    study = SolveConvergenceStudy(
        args.k, args.sigma, (args.beta_x, args.beta_y),
        eps_list=parse_float_list(args.eps),
        n_list=parse_int_list(args.n),
        solver_opts=_solver_options(args),
        problem=args.problem,
        problem_params=_problem_params(args),
        assembly_opts=AssemblyOptions(quad_points=args.q),
        q_err=args.q_err,
        err_subdivisions=args.err_subdivisions,
        norms=_names(args.norms),
        fallback_direct=args.fallback_direct,
        allow_large_eps=args.allow_large_eps,
        progress=not args.no_progress,
    )
    table = study.run()
    if args.out:
        Path(args.out).write_text(emit_table(table, "csv"))
        logger.info("Table written to %s", args.out)
    if args.text or not args.out:
        sys.stdout.write(emit_table(table, args.format))
    failed = table.failed
    if len(failed):
        for row in failed.drop_duplicates(["epsilon", "N"]).itertuples():
            sys.stderr.write(f"eps={row.epsilon:g} N={row.N}: {row.status}\n")
        return 1
    return 0


def run_interp_check(args) -> int:
    n_list = parse_int_list(args.n_list)
    study = InterpConvergenceStudy(args.k, args.sigma, (args.beta_x, args.beta_y), args.eps, n_list,
                                   problem=args.problem, q_err=args.q_err,
                                   err_subdivisions=args.err_subdivisions,
                                   allow_large_eps=args.allow_large_eps, progress=not args.no_progress)
    table = study.run()
    if args.out:
        Path(args.out).write_text(emit_table(table, "csv"))
    sys.stdout.write(emit_table(table, args.format))

    status = 1 if len(table.failed) else 0
    if args.stability:
        for n in n_list:
            report = interp_stability_check(study.decomposition, study.build_mesh(n), args.k, args.samples)
            sys.stdout.write(f"\nStability check N={n}: worst ratio {report.worst:.6g}\n")
            sys.stdout.write(report.table.to_string(index=False) + "\n")
    return status


def run_solve(args) -> int:
    problem, exact = get_problem(args.problem, args.eps, **_problem_params(args))
    sigma = _sigma(args)
    mesh = tensor_mesh(MeshConfig(args.n, args.eps, sigma, args.beta_x, args.allow_large_eps),
                       MeshConfig(args.n, args.eps, sigma, args.beta_y, args.allow_large_eps))
    system = assemble_system(mesh, args.k, problem, AssemblyOptions(quad_points=args.q))
    if args.dump_matrix:
        dump_matrix(system, args.dump_matrix)
    if args.dump_dofs:
        Path(args.dump_dofs).write_text(system.dof_map.dump())

    x, stats = solve(system, _solver_options(args))
    sys.stdout.write(f"dofs={system.n_dofs} {stats}\n")
    if exact is not None:
        norms = error_norms(FemFunction.from_interior(system.dof_map, x), exact,
                            q_err=args.q_err, epsilon=args.eps, subdivisions=args.err_subdivisions)
        sys.stdout.write(" ".join(f"{name}={value:.6e}" for name, value in norms.as_dict().items()) + "\n")
    return 0


def run_assumptions(args) -> int:
    problem, _ = get_problem(args.problem, args.eps, **_problem_params(args))
    report = verify_assumptions(problem, args.grid)
    sys.stdout.write(report.to_string() + "\n")
    return 0 if report["fulfilled"] else 1


def _apply_config(parser: argparse.ArgumentParser, config: Dict[str, object]):
    """Turns config entries into defaults of every subcommand that has a matching flag."""
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    known = set()
    for sub in subparsers.choices.values():
        dests = {action.dest for action in sub._actions}
        known |= dests
        sub.set_defaults(**{key: value for key, value in config.items() if key in dests})
        # a config value satisfies required flags
        for action in sub._actions:
            if action.dest in config:
                action.required = False
    unknown = sorted(set(config) - known - {"log_level"})
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config", default=None)
    pre.add_argument("--log-level", default=None)
    known, _ = pre.parse_known_args(argv)

    config = {}
    if known.config:
        try:
            config = load_config(known.config)
        except (OSError, ValueError) as e:
            parser.error(str(e))
        _apply_config(parser, config)

    args = parser.parse_args(argv)
    level = known.log_level or config.get("log_level", "WARNING")
    logging.basicConfig(level=str(level).upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return args.handler(args)
    except OSError as e:
        parser.error(str(e))
    except (ValueError, TypeError, RuntimeError) as e:
        logger.debug("Command failed", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
