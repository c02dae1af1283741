"""
Error norms and convergence tables.

The energy norm is

    ||v||_eps = (eps |v|_1^2 + ||v||^2)^(1/2),

computed cell by cell with a tensor Gauss rule against analytic values and
gradients.

A `ConvergenceTable` keeps one row per (epsilon, N, norm) in a pandas
DataFrame. The observed order log2(e_N / e_2N) is attached to the coarser N;
the finest N of every group has none ('---' in text output).
"""

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from layerkit.fespace import cell_quadrature, composite_rule
from layerkit.interpolant import FemFunction, interpolate_pi
from layerkit.mesh import TensorMesh2D
from layerkit.problems import Field, SolutionDecomposition
from layerkit.utils import fitted_order, format_error, format_order, observed_order

logger = logging.getLogger(__name__)

COLUMNS = ["epsilon", "N", "norm", "error", "order", "status", "solver", "iterations", "residual", "seconds"]
FORMATS = ("text", "csv", "wide")


@dataclass(frozen=True)
class ErrorNorms:
    """
    Attributes
    ----------
    l2 : float
        ||u - u_h||.
    h1_semi : float
        |u - u_h|_1.
    energy : float
        (eps |u - u_h|_1^2 + ||u - u_h||^2)^(1/2).
    linf_quad : float
        max |u - u_h| over the quadrature points.
    """

    l2: float
    h1_semi: float
    energy: float
    linf_quad: float

    def as_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


def error_norms(uh: FemFunction, exact: Field, mesh: Optional[TensorMesh2D] = None,
                k: Optional[int] = None, q_err: Optional[int] = None,
                epsilon: float = 1.0, subdivisions: int = 1) -> ErrorNorms:
    """
    Computes the errors between a finite element function and an exact field.

    Parameters
    ----------
    uh : FemFunction
        Discrete function.
    exact : Field
        Exact solution with value and first derivatives.
    mesh, k : optional
        If given, must match the mesh and degree of `uh`.
    q_err : int, optional
        Gauss points per cell and direction, k + 3 by default.
    epsilon : float
        Weight of the H1 seminorm in the energy norm.
    subdivisions : int
        Split every cell into subdivisions x subdivisions parts, each with
        its own Gauss rule. The last fine cell of a layer direction holds
        the whole remaining decay of the layer, which one fixed-order rule
        integrates only to about three digits.

    Returns
    -------
    ErrorNorms
    """
    if mesh is not None and mesh is not uh.mesh:
        raise ValueError("uh lives on a different mesh.")
    if k is not None and k != uh.degree:
        raise ValueError(f"uh has degree {uh.degree}, not {k}.")
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}.")
    q = uh.degree + 3 if q_err is None else q_err

    rule = composite_rule(q, subdivisions)
    X, Y, W = cell_quadrature(uh.mesh, rule)
    value, dx, dy = uh.cell_values(rule.points)
    e = exact.value(X, Y) - value
    ex = exact.dx(X, Y) - dx
    ey = exact.dy(X, Y) - dy

    l2 = float(np.sqrt(np.sum(W * e * e)))
    h1 = float(np.sqrt(np.sum(W * (ex * ex + ey * ey))))
    return ErrorNorms(
        l2=l2,
        h1_semi=h1,
        energy=float(np.sqrt(epsilon * h1 * h1 + l2 * l2)),
        linf_quad=float(np.abs(e).max()),
    )


def pi_error(dec: SolutionDecomposition, mesh: TensorMesh2D, k: int, epsilon: float,
             q_err: Optional[int] = None, subdivisions: int = 1) -> ErrorNorms:
    """Errors of the boundary-preserving interpolant, u - Pi u."""
    return error_norms(interpolate_pi(dec, mesh, k), dec.as_field(), q_err=q_err, epsilon=epsilon,
                       subdivisions=subdivisions)


def _orders(data: pd.DataFrame) -> pd.Series:
    orders = pd.Series(np.nan, index=data.index, dtype=float)
    for _, group in data.groupby(["epsilon", "norm"], sort=False):
        group = group.sort_values("N")
        rows = list(group.itertuples())
        for coarse, fine in zip(rows, rows[1:]):
            if coarse.status != "ok" or fine.status != "ok":
                continue
            try:
                orders[coarse.Index] = observed_order(coarse.error, fine.error, ratio=fine.N / coarse.N)
            except ValueError:
                pass
    return orders


@dataclass(eq=False)
class ConvergenceTable:
    """
    Errors per (epsilon, N, norm) with observed orders.

    Attributes
    ----------
    data : pandas.DataFrame
        Columns epsilon, N, norm, error, order, status ('ok' or a failure
        message), solver, iterations, residual and seconds.
    metadata : dict
        Run parameters: degree, sigma, beta, solver settings, quadrature.
    """

    data: pd.DataFrame
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Iterable[Dict[str, Any]],
                     metadata: Optional[Dict[str, Any]] = None) -> "ConvergenceTable":
        data = pd.DataFrame(list(records))
        for column in COLUMNS:
            if column not in data:
                data[column] = np.nan
        data["status"] = data["status"].fillna("ok")
        data = data[COLUMNS].sort_values(["norm", "epsilon", "N"], ascending=[True, False, True],
                                         kind="mergesort").reset_index(drop=True)
        data["order"] = _orders(data)
        return cls(data, dict(metadata or {}))

    def __len__(self):
        return len(self.data)

    @property
    def norms(self) -> List[str]:
        return list(dict.fromkeys(self.data["norm"]))

    @property
    def epsilons(self) -> List[float]:
        return list(dict.fromkeys(self.data["epsilon"]))

    @property
    def failed(self) -> pd.DataFrame:
        return self.data[self.data["status"] != "ok"]

    def errors(self, epsilon: float, norm: str = "energy") -> pd.Series:
        """Errors indexed by N for one epsilon and norm."""
        rows = self.data[(self.data["epsilon"] == epsilon) & (self.data["norm"] == norm)]
        return rows.set_index("N")["error"].sort_index()

    def orders(self, epsilon: float, norm: str = "energy") -> pd.Series:
        rows = self.data[(self.data["epsilon"] == epsilon) & (self.data["norm"] == norm)]
        return rows.set_index("N")["order"].sort_index()

    def fitted_order(self, epsilon: float, norm: str = "energy") -> float:
        """Least-squares slope of -log(error) against log(N) over the solved cells."""
        errors = self.errors(epsilon, norm).dropna()
        return fitted_order(errors.index.to_numpy(), errors.to_numpy())


def _cell_text(row) -> str:
    if row.status != "ok":
        return "FAILED"
    return f"{format_error(row.error)} {format_order(row.order):>5}"


def _metadata_line(metadata: Dict[str, Any]) -> str:
    return " ".join(f"{key}={value}" for key, value in metadata.items())


def _text(t: ConvergenceTable) -> str:
    lines = []
    if t.metadata:
        lines.append(_metadata_line(t.metadata))
    n_values = sorted(set(t.data["N"]))
    for norm in t.norms:
        lines.append(f"Errors in the {norm} norm and convergence order")
        lines.append("eps".ljust(8) + "".join(f"N={n}".ljust(17) for n in n_values).rstrip())
        block = t.data[t.data["norm"] == norm]
        for eps, group in block.groupby("epsilon", sort=False):
            cells = {row.N: _cell_text(row) for row in group.itertuples()}
            line = f"{eps:.0e}".ljust(8) + "".join(cells.get(n, "").ljust(17) for n in n_values)
            lines.append(line.rstrip())
        lines.append("")
    return "\n".join(lines)


def _wide(t: ConvergenceTable) -> str:
    lines = []
    if t.metadata:
        lines.append(_metadata_line(t.metadata))
    for eps in t.epsilons:
        block = t.data[t.data["epsilon"] == eps]
        norms = list(dict.fromkeys(block["norm"]))
        lines.append(f"eps={eps:g}")
        lines.append("N".ljust(6) + "".join(name.ljust(12) + "order".ljust(7) for name in norms).rstrip())
        for n in sorted(set(block["N"])):
            line = str(n).ljust(6)
            for name in norms:
                row = block[(block["N"] == n) & (block["norm"] == name)]
                if row.empty:
                    line += "".ljust(19)
                    continue
                row = next(row.itertuples())
                if row.status != "ok":
                    line += "FAILED".ljust(19)
                else:
                    line += format_error(row.error).ljust(12) + format_order(row.order).ljust(7)
            lines.append(line.rstrip())
        lines.append("")
    return "\n".join(lines)


def _csv(t: ConvergenceTable) -> str:
    header = f"# metadata: {json.dumps(t.metadata, sort_keys=True, default=str)}\n"
    return header + t.data.to_csv(index=False, float_format="%.17g")


def emit_table(t: ConvergenceTable, fmt: str = "text") -> str:
    """
    Serializes a convergence table.

    Parameters
    ----------
    t : ConvergenceTable
        Nonempty table.
    fmt : str
        'text' groups error/order pairs by epsilon with one column per N,
        'wide' puts one row per N and one error/order column pair per norm,
        'csv' writes one row per (epsilon, N, norm) with full precision.

    Raises
    ------
    ValueError
        If the table is empty or the format is unknown.
    """
    if fmt not in FORMATS:
        raise ValueError(f"Unknown table format '{fmt}'. Supported formats are: {', '.join(FORMATS)}.")
    if len(t) == 0:
        raise ValueError("Cannot emit an empty table.")
    if fmt == "csv":
        return _csv(t)
    if fmt == "wide":
        return _wide(t)
    return _text(t)


def read_table_csv(source: Union[str, Path]) -> ConvergenceTable:
    """Parses `emit_table(..., 'csv')` output, given as text or a file path."""
    if isinstance(source, Path) or ("\n" not in source and Path(source).is_file()):
        source = Path(source).read_text()
    metadata = {}
    body = []
    for line in source.splitlines(keepends=True):
        if line.startswith("# metadata:"):
            metadata = json.loads(line[len("# metadata:"):])
        elif not line.startswith("#"):
            body.append(line)
    data = pd.read_csv(io.StringIO("".join(body)), float_precision="round_trip")
    data["status"] = data["status"].fillna("ok").astype(str)
    return ConvergenceTable(data[COLUMNS], metadata)
