"""Exact linear algebra over the rationals.

Ranks are computed by Bareiss fraction-free elimination on integer
matrices (rational input is cleared row by row), so every intermediate
division is exact and the result is the true rank over Q, independent of
any floating threshold.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm


def _clear_rows(matrix) -> list[list[int]]:
    """Scale each row by the lcm of its denominators (rank-preserving)."""
    rows = []
    for row in matrix:
        fracs = [Fraction(x) for x in row]
        mult = lcm(*(f.denominator for f in fracs)) if fracs else 1
        rows.append([int(f * mult) for f in fracs])
    return rows


def rational_rank(matrix) -> int:
    """Rank over Q of a matrix of Fractions / ints (list of rows)."""
    m = _clear_rows(matrix)
    if not m or not m[0]:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    prev = 1
    row = 0
    for col in range(ncols):
        pivot = None
        for r in range(row, nrows):
            if m[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        if pivot != row:
            m[row], m[pivot] = m[pivot], m[row]
        for r in range(row + 1, nrows):
            for c in range(col + 1, ncols):
                m[r][c] = (m[row][col] * m[r][c] - m[r][col] * m[row][c]) // prev
            m[r][col] = 0
        prev = m[row][col]
        rank += 1
        row += 1
        if row == nrows:
            break
    return rank


def rational_nullity(matrix, ncols: int | None = None) -> int:
    """dim ker over Q; ncols needed when the matrix has zero rows."""
    if not matrix:
        return ncols or 0
    cols = ncols if ncols is not None else len(matrix[0])
    return cols - rational_rank(matrix)


def integer_determinant(matrix) -> int:
    """Exact determinant of a square integer matrix (Bareiss)."""
    m = [[int(x) for x in row] for row in matrix]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for r in range(k + 1, n):
            for c in range(k + 1, n):
                m[r][c] = (m[k][k] * m[r][c] - m[r][k] * m[k][c]) // prev
            m[r][k] = 0
        prev = m[k][k]
    return sign * m[-1][-1]


def fraction_from_string(s) -> Fraction:
    """Parse "p/q" / "p" / int into an exact Fraction (floats rejected)."""
    if isinstance(s, Fraction):
        return s
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, str):
        return Fraction(s.strip())
    raise TypeError(f"cannot parse {s!r} as an exact rational")
