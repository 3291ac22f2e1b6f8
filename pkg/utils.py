"""
Formatting and parsing helpers for the command line front end.
"""

import logging
import re
from fractions import Fraction
from typing import List

from core.errors import DomainError
from core.exact import RationalSurd

logger = logging.getLogger(__name__)

_GRID_PATTERN = re.compile(r"^(\d+):(\d+):([x+])(\d+)$")


def format_exact(value) -> str:
    """
    Format an exact value for display.

    Args:
        value: int, Fraction, RationalSurd or float

    Returns:
        "18/5", "2/21*sqrt(21)", or the float repr
    """
    if isinstance(value, (int, Fraction, RationalSurd)):
        return str(value)
    return repr(float(value))


def format_falling_coefficient(leading: int, m: int) -> str:
    """
    Render leading * (n)_m symbolically.

    Examples: (1, 1) -> "n", (3, 2) -> "3n(n-1)", (10, 3) -> "10n(n-1)(n-2)".
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    factors = "n" + "".join(f"(n-{i})" for i in range(1, m))
    return factors if leading == 1 else f"{leading}{factors}"


def format_polynomial(coefficients: List[Fraction], variable: str = "n") -> str:
    """
    Render a polynomial whose coefficients are given lowest power first.

    [0, 120, 130, 15] -> "15n^3 + 130n^2 + 120n"
    """
    terms = []
    for power in range(len(coefficients) - 1, -1, -1):
        c = coefficients[power]
        if c == 0:
            continue
        magnitude = abs(c)
        if power == 0:
            body = str(magnitude)
        else:
            unit = variable if power == 1 else f"{variable}^{power}"
            body = unit if magnitude == 1 else f"{magnitude}{unit}"
            if isinstance(magnitude, Fraction) and magnitude.denominator != 1:
                body = f"({magnitude}){unit}"
        sign = "-" if c < 0 else "+"
        terms.append((sign, body))
    if not terms:
        return "0"
    first_sign, first_body = terms[0]
    text = ("-" if first_sign == "-" else "") + first_body
    for sign, body in terms[1:]:
        text += f" {sign} {body}"
    return text


def parse_ngrid(text: str) -> List[int]:
    """
    Parse an n grid.

    Accepts "start:stop:xF" (geometric, factor F), "start:stop:+D"
    (arithmetic, step D) or a comma separated list "10,100,1000".
    """
    text = text.strip()
    match = _GRID_PATTERN.match(text)
    if match:
        start, stop, kind, step = match.groups()
        start, stop, step = int(start), int(stop), int(step)
        if start < 1 or stop < start:
            raise DomainError(f"invalid n grid bounds in {text!r}")
        if (kind == "x" and step < 2) or (kind == "+" and step < 1):
            raise DomainError(f"invalid n grid step in {text!r}")
        grid = []
        n = start
        while n <= stop:
            grid.append(n)
            n = n * step if kind == "x" else n + step
        return grid

    try:
        grid = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise DomainError(f"cannot parse n grid {text!r}") from e
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise DomainError(f"n grid must be positive and strictly increasing: {text!r}")
    return grid


def parse_int_list(text: str) -> List[int]:
    """Parse "2,3,4" or a range "2:6" (inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            low, high = (int(part) for part in text.split(":", 1))
            return list(range(low, high + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise DomainError(f"cannot parse integer list {text!r}") from e


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise DomainError(f"cannot parse number list {text!r}") from e
