"""
Problem instances for

    -eps * Laplace(u) - b . grad(u) + c u = f   in (0, 1)^2,   u = 0 on the boundary,

with b1 >= beta1 > 0, b2 >= beta2 > 0 and c + div(b)/2 >= gamma > 0.

Main Functionalities
--------------------
1. `paper_problem`: convection b = (2 + x - y, 2 - x + y), c = 2, and a
   manufactured solution with exponential layers at x = 0 and y = 0.
2. `paper_decomposition`: the split u = S + E1 + E2 + E12 of that solution
   into smooth, edge-layer and corner-layer parts.
3. `verify_assumptions`: sample the coefficient bounds on a grid.
4. A registry (`get_problem`, `list_problems`) used by the CLI.

All fields are numpy callables f(x, y) that broadcast over array inputs.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

ScalarFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Field:
    """A scalar field with its first partial derivatives."""

    value: ScalarFunction
    dx: ScalarFunction
    dy: ScalarFunction

    def __call__(self, x, y):
        return self.value(x, y)


@dataclass(frozen=True)
class SolutionDecomposition:
    """u = S + E1 + E2 + E12 with smooth part S, layers E1 (x = 0), E2 (y = 0) and corner layer E12."""

    S: Field
    E1: Field
    E2: Field
    E12: Field

    def components(self) -> Dict[str, Field]:
        return {"S": self.S, "E1": self.E1, "E2": self.E2, "E12": self.E12}

    def value(self, x, y):
        # S + E2 and E1 + E12 cancel exactly on y = 0
        return (self.S(x, y) + self.E2(x, y)) + (self.E1(x, y) + self.E12(x, y))

    def as_field(self) -> Field:
        """The sum S + E1 + E2 + E12 with its derivatives."""
        parts = (self.S, self.E2, self.E1, self.E12)
        return Field(
            self.value,
            lambda x, y: sum(part.dx(x, y) for part in parts),
            lambda x, y: sum(part.dy(x, y) for part in parts),
        )


@dataclass(frozen=True)
class ExactSolution(Field):
    """Exact solution u with first derivatives and an optional decomposition."""

    decomposition: Optional[SolutionDecomposition] = None


@dataclass(frozen=True)
class Problem:
    """
    Coefficients and data of a convection-diffusion problem.

    Attributes
    ----------
    name : str
    epsilon : float
        Diffusion coefficient.
    b1, b2 : callable
        Convection field; the operator carries -b . grad(u).
    c : callable
        Reaction coefficient.
    f : callable
        Source term.
    div_b : callable
        d(b1)/dx + d(b2)/dy, needed for the coercivity bound.
    beta1, beta2, gamma : float
        Lower bounds b1 >= beta1, b2 >= beta2, c + div(b)/2 >= gamma.
    """

    name: str
    epsilon: float
    b1: ScalarFunction
    b2: ScalarFunction
    c: ScalarFunction
    f: ScalarFunction
    div_b: ScalarFunction
    beta1: float
    beta2: float
    gamma: float


def _constant(value: float) -> ScalarFunction:
    def field(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(value))
    return field


def _check_epsilon(epsilon: float):
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}.")


def _sine(x):
    # sin(pi x) = sin(pi (1 - x)); folding onto [0, 1/2] makes both ends exactly zero
    x = np.asarray(x, dtype=float)
    return np.sin(np.pi * np.minimum(x, 1.0 - x))


def paper_decomposition(epsilon: float) -> SolutionDecomposition:
    """
    Decomposition of u = 2 sin(pi x)(1 - e^{-2x/eps})(1 - y)^2 (1 - e^{-y/eps}):

        S   = 2 sin(pi x)(1 - y)^2
        E1  = -S e^{-2x/eps}
        E2  = -S e^{-y/eps}
        E12 =  S e^{-(2x + y)/eps}
    """
    _check_epsilon(epsilon)
    eps = epsilon

    def s_value(x, y):
        return 2.0 * _sine(x) * (1.0 - y) ** 2

    def s_dx(x, y):
        return 2.0 * np.pi * np.cos(np.pi * x) * (1.0 - y) ** 2

    def s_dy(x, y):
        return -4.0 * _sine(x) * (1.0 - y)

    def ex(x):
        return np.exp(-2.0 * x / eps)

    def ey(y):
        return np.exp(-y / eps)

    def exy(x, y):
        return np.exp(-(2.0 * x + y) / eps)

    S = Field(s_value, s_dx, s_dy)
    E1 = Field(
        lambda x, y: -s_value(x, y) * ex(x),
        lambda x, y: (-s_dx(x, y) + (2.0 / eps) * s_value(x, y)) * ex(x),
        lambda x, y: -s_dy(x, y) * ex(x),
    )
    E2 = Field(
        lambda x, y: -s_value(x, y) * ey(y),
        lambda x, y: -s_dx(x, y) * ey(y),
        lambda x, y: (-s_dy(x, y) + (1.0 / eps) * s_value(x, y)) * ey(y),
    )
    E12 = Field(
        lambda x, y: s_value(x, y) * exy(x, y),
        lambda x, y: (s_dx(x, y) - (2.0 / eps) * s_value(x, y)) * exy(x, y),
        lambda x, y: (s_dy(x, y) - (1.0 / eps) * s_value(x, y)) * exy(x, y),
    )
    return SolutionDecomposition(S, E1, E2, E12)


def _paper_factors(epsilon: float):
    """u = 2 X(x) Y(y); returns callables for X, X', X'', Y, Y', Y''."""
    eps = epsilon

    def X(x):
        return _sine(x) * -np.expm1(-2.0 * x / eps)

    def X1(x):
        ex = np.exp(-2.0 * x / eps)
        return np.pi * np.cos(np.pi * x) * -np.expm1(-2.0 * x / eps) + _sine(x) * (2.0 / eps) * ex

    def X2(x):
        ex = np.exp(-2.0 * x / eps)
        return (
            -np.pi ** 2 * _sine(x) * -np.expm1(-2.0 * x / eps)
            + 2.0 * np.pi * np.cos(np.pi * x) * (2.0 / eps) * ex
            - _sine(x) * (4.0 / eps ** 2) * ex
        )

    def Y(y):
        return (1.0 - y) ** 2 * -np.expm1(-y / eps)

    def Y1(y):
        ey = np.exp(-y / eps)
        return -2.0 * (1.0 - y) * -np.expm1(-y / eps) + (1.0 - y) ** 2 * ey / eps

    def Y2(y):
        ey = np.exp(-y / eps)
        return (
            2.0 * -np.expm1(-y / eps)
            - 4.0 * (1.0 - y) * ey / eps
            - (1.0 - y) ** 2 * ey / eps ** 2
        )

    return X, X1, X2, Y, Y1, Y2


def paper_problem(epsilon: float) -> Tuple[Problem, ExactSolution]:
    """
    The model problem with b = (2 + x - y, 2 - x + y), c = 2 and exact solution

        u(x, y) = 2 sin(pi x)(1 - e^{-2x/eps})(1 - y)^2 (1 - e^{-y/eps}).

    The source f = -eps Laplace(u) - b . grad(u) + c u is evaluated from
    hand-coded derivatives of u. beta1 = beta2 = 1 are the infima of b1, b2
    on the unit square and gamma = 2 + (1 + 1)/2 = 3.

    Parameters
    ----------
    epsilon : float
        Perturbation parameter in (0, 1).

    Returns
    -------
    (Problem, ExactSolution)
    """
    _check_epsilon(epsilon)
    eps = epsilon
    X, X1, X2, Y, Y1, Y2 = _paper_factors(eps)

    def b1(x, y):
        return 2.0 + x - y

    def b2(x, y):
        return 2.0 - x + y

    def u(x, y):
        return 2.0 * X(x) * Y(y)

    def u_x(x, y):
        return 2.0 * X1(x) * Y(y)

    def u_y(x, y):
        return 2.0 * X(x) * Y1(y)

    def f(x, y):
        laplacian = 2.0 * (X2(x) * Y(y) + X(x) * Y2(y))
        return -eps * laplacian - b1(x, y) * u_x(x, y) - b2(x, y) * u_y(x, y) + 2.0 * u(x, y)

    problem = Problem(
        name="paper-example",
        epsilon=eps,
        b1=b1,
        b2=b2,
        c=_constant(2.0),
        f=f,
        div_b=_constant(2.0),
        beta1=1.0,
        beta2=1.0,
        gamma=3.0,
    )
    exact = ExactSolution(u, u_x, u_y, decomposition=paper_decomposition(eps))
    return problem, exact


def constant_problem(epsilon: float, b1: float = 1.0, b2: float = 1.0, c: float = 1.0,
                     source: float = 1.0) -> Tuple[Problem, Optional[ExactSolution]]:
    """
    Constant coefficients b = (b1, b2), reaction c and source. There is no
    closed-form solution, so the second element of the result is None.
    """
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}.")
    problem = Problem(
        name="constant-coefficients",
        epsilon=float(epsilon),
        b1=_constant(b1),
        b2=_constant(b2),
        c=_constant(c),
        f=_constant(source),
        div_b=_constant(0.0),
        beta1=float(b1),
        beta2=float(b2),
        gamma=float(c),
    )
    return problem, None


PROBLEMS: Dict[str, Callable[..., Tuple[Problem, Optional[ExactSolution]]]] = {
    "paper-example": lambda epsilon, **params: paper_problem(epsilon, **params),
    "constant-coefficients": constant_problem,
}


def list_problems():
    """Names of the registered problems."""
    return sorted(PROBLEMS)


def get_problem(name: str, epsilon: float, **params) -> Tuple[Problem, Optional[ExactSolution]]:
    """
    Builds a registered problem.

    Raises
    ------
    ValueError
        If the name is not registered or the parameters are not accepted.
    """
    if name not in PROBLEMS:
        raise ValueError(
            f"Unknown problem '{name}'. Available problems are: {', '.join(list_problems())}."
        )
    try:
        return PROBLEMS[name](epsilon, **params)
    except TypeError as e:
        raise ValueError(f"Invalid parameters for problem '{name}': {e}") from e


def verify_assumptions(p: Problem, grid: int = 101) -> pd.Series:
    """
    Samples b1, b2 and c + div(b)/2 on a uniform grid over the closed unit
    square and compares their minima with beta1, beta2 and gamma.

    Parameters
    ----------
    p : Problem
        The problem to check.
    grid : int
        Number of sample points per direction (endpoints included).

    Returns
    -------
    pandas.Series
        Minimum and location of each quantity, per-bound flags and an overall
        'fulfilled' flag.
    """
    if grid < 2:
        raise ValueError("The sample grid needs at least 2 points per direction.")
    xs = np.linspace(0.0, 1.0, grid)
    X, Y = np.meshgrid(xs, xs, indexing="ij")

    sampled = {
        "b1": np.broadcast_to(p.b1(X, Y), X.shape),
        "b2": np.broadcast_to(p.b2(X, Y), X.shape),
        "reaction": np.broadcast_to(p.c(X, Y) + 0.5 * p.div_b(X, Y), X.shape),
    }
    bounds = {"b1": p.beta1, "b2": p.beta2, "reaction": p.gamma}

    report = {}
    fulfilled = True
    for key, values in sampled.items():
        where = np.unravel_index(np.argmin(values), values.shape)
        minimum = float(values[where])
        report[f"min_{key}"] = minimum
        report[f"min_{key}_x"] = float(X[where])
        report[f"min_{key}_y"] = float(Y[where])
        ok = bounds[key] > 0 and minimum >= bounds[key] - 1e-12
        report[f"{key}_ok"] = bool(ok)
        fulfilled = fulfilled and ok
    report["fulfilled"] = bool(fulfilled)

    if not fulfilled:
        logger.warning("Problem '%s' violates the coefficient assumptions: %s", p.name,
                       ", ".join(k[:-3] for k, v in report.items() if k.endswith("_ok") and not v))
    return pd.Series(report)
