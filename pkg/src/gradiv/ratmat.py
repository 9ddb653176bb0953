"""Exact linear algebra over the rationals and modulo a large prime.

Thin adapters around python-flint matrices.  Rational matrices are given as
nested lists of ``Fraction`` (or ints); results come back as ``Fraction``.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import flint
import numpy as np

PRIME = (1 << 61) - 1


def _q(x) -> flint.fmpq:
    if isinstance(x, flint.fmpq):
        return x
    if isinstance(x, int):
        return flint.fmpq(x)
    x = Fraction(x)
    return flint.fmpq(x.numerator, x.denominator)


def to_flint(rows: Sequence[Sequence], ncols: int | None = None) -> flint.fmpq_mat:
    m = len(rows)
    n = len(rows[0]) if m else (ncols or 0)
    flat = [_q(v) for row in rows for v in row]
    return flint.fmpq_mat(m, n, flat)


def from_flint(mat: flint.fmpq_mat) -> list[list[Fraction]]:
    m, n = mat.nrows(), mat.ncols()
    vals = [Fraction(int(e.p), int(e.q)) for e in mat.entries()]
    return [vals[i * n:(i + 1) * n] for i in range(m)]


def to_float(mat: flint.fmpq_mat) -> np.ndarray:
    m, n = mat.nrows(), mat.ncols()
    vals = [int(e.p) / int(e.q) if e.q != 1 else float(int(e.p)) for e in mat.entries()]
    return np.array(vals, dtype=float).reshape(m, n)


def rank(rows) -> int:
    mat = rows if isinstance(rows, flint.fmpq_mat) else to_flint(rows)
    if mat.nrows() == 0 or mat.ncols() == 0:
        return 0
    return mat.rank()


def pivot_columns(mat: flint.fmpq_mat) -> list[int]:
    """Pivot columns of the reduced row echelon form (leftmost-first)."""
    if mat.nrows() == 0 or mat.ncols() == 0:
        return []
    red, rk = mat.rref()
    pivots = []
    n = mat.ncols()
    for i in range(rk):
        for j in range(n):
            if red[i, j] != 0:
                pivots.append(j)
                break
    return pivots


def inverse(mat: flint.fmpq_mat) -> flint.fmpq_mat:
    return mat.inv()


def _mod(x: Fraction, p: int) -> int:
    num, den = x.numerator % p, x.denominator % p
    if den == 0:
        raise ZeroDivisionError("denominator divisible by the modulus")
    return num * pow(den, -1, p) % p


def modular_rank(entries: Iterable[tuple[int, int, Fraction]], shape: tuple[int, int], p: int = PRIME) -> int:
    """Rank mod p of a sparse rational matrix given as (row, col, value) triples.

    Full rank mod p certifies full rank over Q; in general the modular rank
    is a lower bound for the rational one.
    """
    m, n = shape
    if m == 0 or n == 0:
        return 0
    mat = flint.nmod_mat(m, n, p)
    for i, j, v in entries:
        mat[i, j] = (int(mat[i, j]) + _mod(Fraction(v), p)) % p
    return mat.rank()
