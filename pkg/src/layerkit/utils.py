from math import floor, log2, log10
from typing import Iterable, List, Sequence, Union

import numpy as np

Number = Union[float, int]


def observed_order(coarse_error: Number, fine_error: Number, ratio: Number = 2) -> float:
    """
    Computes the observed order of accuracy between two refinement levels.

    Parameters:
        coarse_error (Union[float, int]): Error on the coarser mesh (N cells).
        fine_error (Union[float, int]): Error on the finer mesh (ratio * N cells).
        ratio (Union[float, int]): Refinement ratio between the two meshes.
            Defaults to 2, which gives log2(e_N / e_2N).

    Returns:
        float: The observed order.

    Raises:
        ValueError: If either error is non-positive or the ratio is not
        greater than one.
    """
    for error in (coarse_error, fine_error):
        if not isinstance(error, (float, int, np.floating)) or not error > 0:
            raise ValueError("Errors must be positive numbers.")
    if ratio <= 1:
        raise ValueError("The refinement ratio must be greater than 1.")

    if ratio == 2:
        return log2(coarse_error / fine_error)
    return log10(coarse_error / fine_error) / log10(ratio)


def fitted_order(n_values: Sequence[Number], errors: Sequence[Number]) -> float:
    """
    Least-squares slope of log(error) against log(N), sign flipped so that
    an error behaving like C N^-p gives p.

    Parameters:
        n_values (Sequence[Union[float, int]]): Mesh sizes N.
        errors (Sequence[Union[float, int]]): Errors for each N.

    Returns:
        float: The fitted order p.

    Raises:
        ValueError: If fewer than two points are given, lengths differ, or
        any value is non-positive.
    """
    n_arr = np.asarray(n_values, dtype=float)
    e_arr = np.asarray(errors, dtype=float)
    if n_arr.shape != e_arr.shape:
        raise ValueError("n_values and errors must have the same length.")
    if n_arr.size < 2:
        raise ValueError("At least two points are needed to fit an order.")
    if np.any(n_arr <= 0) or np.any(~(e_arr > 0)):
        raise ValueError("N values and errors must be positive.")

    slope, _ = np.polyfit(np.log(n_arr), np.log(e_arr), 1)
    return float(-slope)


def format_error(value: Number) -> str:
    """
    Formats an error value with a normalised mantissa in [0.1, 1) and
    three significant digits, e.g. 0.339 -> '0.339E+00', 0.0834 -> '0.834E-01'.

    NaN is rendered as 'NaN' and zero as '0.000E+00'.
    """
    if value != value:
        return "NaN"
    if value == 0:
        return "0.000E+00"
    sign = "-" if value < 0 else ""
    magnitude = abs(float(value))
    exponent = floor(log10(magnitude)) + 1
    mantissa = round(magnitude / 10.0 ** exponent, 3)
    # rounding can carry into the next decade (0.9996 -> 1.000)
    if mantissa >= 1.0:
        mantissa /= 10.0
        exponent += 1
    elif mantissa < 0.1:
        mantissa *= 10.0
        exponent -= 1
    return f"{sign}{mantissa:.3f}E{exponent:+03d}"


def format_order(value: Number) -> str:
    """Formats an observed order to two decimals; missing orders print as '---'."""
    if value is None or value != value:
        return "---"
    return f"{value:.2f}"


def parse_float_list(text: Union[str, Iterable[Number]]) -> List[float]:
    """
    Parses a comma-separated list such as '1e-4,1e-5' into floats.
    Lists and tuples are passed through with their items converted.
    """
    if isinstance(text, str):
        items = [item.strip() for item in text.split(",") if item.strip()]
    elif isinstance(text, (int, float, np.number)):
        items = [text]
    else:
        items = list(text)
    if not items:
        raise ValueError("Expected a non-empty list of numbers.")
    try:
        return [float(item) for item in items]
    except (TypeError, ValueError) as e:
        raise ValueError(f"Invalid number list '{text}': {e}") from e


def parse_int_list(text: Union[str, Iterable[Number]]) -> List[int]:
    """Parses a comma-separated list such as '8,16,32' into integers."""
    values = parse_float_list(text)
    if any(value != int(value) for value in values):
        raise ValueError(f"Expected integers, got '{text}'.")
    return [int(value) for value in values]
