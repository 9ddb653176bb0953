"""Separable polynomial fields: sums of products of univariate polynomials.

Manufactured solutions and their derived quantities are short sums of
terms ``c * a(x) b(y) c(z)``.  Keeping them in this form makes exact
integrals over the unit cube cheap and lets quadrature on a structured
lattice evaluate each univariate factor once per (lattice index, point).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polyalg import Polynomial, VectorPolynomial

Poly1D = tuple  # ascending Fractions, no trailing zeros


def _trim(c: Sequence) -> Poly1D:
    c = [Fraction(x) for x in c]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def poly1d_diff(a: Poly1D) -> Poly1D:
    return _trim([i * a[i] for i in range(1, len(a))])


def poly1d_mul(a: Poly1D, b: Poly1D) -> Poly1D:
    out = [Fraction(0)] * max(len(a) + len(b) - 1, 0)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def poly1d_integral01(a: Poly1D) -> Fraction:
    return sum((c / (i + 1) for i, c in enumerate(a)), Fraction(0))


def poly1d_eval(a: Poly1D, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in reversed(a):
        out = out * x + float(c)
    return out


@dataclass(frozen=True)
class SeparableField:
    """Scalar (ncomp=1) or vector (ncomp=3) field; terms are (comp, coef, ix, iy, iz)."""

    ncomp: int
    polys: tuple[Poly1D, ...]
    terms: tuple[tuple[int, Fraction, int, int, int], ...]

    # -- construction --------------------------------------------------------------
    @staticmethod
    def build(ncomp: int, raw: Sequence[tuple[int, Fraction, Poly1D, Poly1D, Poly1D]]) -> "SeparableField":
        polys: list[Poly1D] = []
        index: dict[Poly1D, int] = {}
        merged: dict[tuple, Fraction] = {}

        def idx(p: Poly1D) -> int:
            p = _trim(p)
            if p not in index:
                index[p] = len(polys)
                polys.append(p)
            return index[p]

        for comp, coef, a, b, c in raw:
            a, b, c = _trim(a), _trim(b), _trim(c)
            if coef == 0 or not a or not b or not c:
                continue
            key = (comp, idx(a), idx(b), idx(c))
            merged[key] = merged.get(key, Fraction(0)) + Fraction(coef)
        terms = tuple((k[0], v, k[1], k[2], k[3]) for k, v in merged.items() if v != 0)
        used = sorted({i for t in terms for i in t[2:]})
        remap = {old: new for new, old in enumerate(used)}
        return SeparableField(ncomp, tuple(polys[i] for i in used),
                              tuple((t[0], t[1], remap[t[2]], remap[t[3]], remap[t[4]]) for t in terms))

    @classmethod
    def product(cls, a: Sequence, b: Sequence, c: Sequence) -> "SeparableField":
        return cls.build(1, [(0, Fraction(1), tuple(a), tuple(b), tuple(c))])

    @classmethod
    def from_polynomial(cls, p: Polynomial | VectorPolynomial) -> "SeparableField":
        comps = [p] if isinstance(p, Polynomial) else list(p.c)
        raw = []
        for ci, q in enumerate(comps):
            for alpha, coef in q.terms.items():
                raw.append((ci, coef, *[tuple([0] * a + [1]) for a in alpha]))
        return cls.build(len(comps), raw)

    def _raw(self):
        return [(c, coef, self.polys[i], self.polys[j], self.polys[k]) for c, coef, i, j, k in self.terms]

    # -- algebra -------------------------------------------------------------------
    def __add__(self, other: "SeparableField") -> "SeparableField":
        if self.ncomp != other.ncomp:
            raise ValueError("component count mismatch")
        return SeparableField.build(self.ncomp, self._raw() + other._raw())

    def __mul__(self, s) -> "SeparableField":
        return SeparableField.build(self.ncomp, [(c, coef * Fraction(s), a, b, d) for c, coef, a, b, d in self._raw()])

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def component(self, i: int) -> "SeparableField":
        return SeparableField.build(1, [(0, coef, a, b, d) for c, coef, a, b, d in self._raw() if c == i])

    def partial(self, axis: int) -> "SeparableField":
        raw = []
        for c, coef, *fs in self._raw():
            fs = list(fs)
            fs[axis] = poly1d_diff(fs[axis])
            raw.append((c, coef, *fs))
        return SeparableField.build(self.ncomp, raw)

    def grad(self) -> "SeparableField":
        if self.ncomp != 1:
            raise ValueError("gradient of a vector field")
        raw = []
        for axis in range(3):
            raw += [(axis, coef, a, b, d) for _, coef, a, b, d in self.partial(axis)._raw()]
        return SeparableField.build(3, raw)

    def div(self) -> "SeparableField":
        if self.ncomp != 3:
            raise ValueError("divergence of a scalar field")
        out = SeparableField.build(1, [])
        for axis in range(3):
            out = out + self.component(axis).partial(axis)
        return out

    def curl(self) -> "SeparableField":
        if self.ncomp != 3:
            raise ValueError("curl of a scalar field")
        raw = []
        for i, (a, b) in enumerate([(1, 2), (2, 0), (0, 1)]):
            # (curl v)_i = d_a v_b - d_b v_a
            raw += [(i, coef, *f) for _, coef, *f in self.component(b).partial(a)._raw()]
            raw += [(i, -coef, *f) for _, coef, *f in self.component(a).partial(b)._raw()]
        return SeparableField.build(3, raw)

    def laplacian(self) -> "SeparableField":
        out = SeparableField.build(self.ncomp, [])
        for axis in range(3):
            out = out + self.partial(axis).partial(axis)
        return out

    # -- exact forms ---------------------------------------------------------------
    def to_polynomial(self) -> Polynomial | VectorPolynomial:
        comps = [Polynomial() for _ in range(self.ncomp)]
        for c, coef, i, j, k in self.terms:
            term = Polynomial.constant(coef)
            for var, idx in enumerate((i, j, k)):
                term = term * Polynomial.univariate(self.polys[idx], var)
            comps[c] = comps[c] + term
        return comps[0] if self.ncomp == 1 else VectorPolynomial(comps)

    def l2_squared(self) -> Fraction:
        """Exact squared L2 norm over the unit cube."""
        total = Fraction(0)
        cache: dict = {}

        def ip(a: int, b: int) -> Fraction:
            key = (min(a, b), max(a, b))
            if key not in cache:
                cache[key] = poly1d_integral01(poly1d_mul(self.polys[a], self.polys[b]))
            return cache[key]

        for c1, k1, *f1 in self.terms:
            for c2, k2, *f2 in self.terms:
                if c1 == c2:
                    total += k1 * k2 * ip(f1[0], f2[0]) * ip(f1[1], f2[1]) * ip(f1[2], f2[2])
        return total

    def restrict_is_zero(self, axis: int, value: Fraction) -> bool:
        """Exact test that the field vanishes on the plane x_axis = value."""
        poly = self.to_polynomial()
        comps = [poly] if isinstance(poly, Polynomial) else list(poly.c)
        for q in comps:
            rows = [[Fraction(0)] * 3 for _ in range(3)]
            shift = [Fraction(0)] * 3
            for d in range(3):
                if d != axis:
                    rows[d][d] = Fraction(1)
            shift[axis] = Fraction(value)
            if not q.compose_affine(rows, shift).is_zero():
                return False
        return True

    # -- float evaluation ----------------------------------------------------------
    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = [[poly1d_eval(p, pts[:, d]) for p in self.polys] for d in range(3)]
        out = np.zeros((len(pts), self.ncomp))
        for c, coef, i, j, k in self.terms:
            out[:, c] += float(coef) * vals[0][i] * vals[1][j] * vals[2][k]
        return out[:, 0] if self.ncomp == 1 else out

    def lattice_tables(self, N: int, offsets: np.ndarray) -> np.ndarray:
        """T[d, p, i, q] = polys[p](i/N + offsets[q, d]) for lattice index i = 0..N."""
        offsets = np.asarray(offsets, dtype=float)
        grid = np.arange(N + 1)[:, None] / N
        T = np.empty((3, len(self.polys), N + 1, len(offsets)))
        for d in range(3):
            x = grid + offsets[None, :, d]
            for p, poly in enumerate(self.polys):
                T[d, p] = poly1d_eval(poly, x)
        return T

    def term_arrays(self):
        """(comp, coef, ix, iy, iz) as contiguous arrays for the kernels."""
        if not self.terms:
            z = np.zeros(0, dtype=np.int64)
            return z, np.zeros(0), z, z, z
        t = np.array([(c, i, j, k) for c, _, i, j, k in self.terms], dtype=np.int64)
        coef = np.array([float(x[1]) for x in self.terms])
        return (np.ascontiguousarray(t[:, 0]), coef, np.ascontiguousarray(t[:, 1]),
                np.ascontiguousarray(t[:, 2]), np.ascontiguousarray(t[:, 3]))
