"""Exact multivariate polynomials in three variables with rational coefficients.

Monomials are exponent triples ``(a1, a2, a3)``; bases are ordered graded
lexicographically (total degree first, then x1 before x2 before x3).
Polynomials on faces and edges reuse the same representation with the
unused exponents set to zero.
"""
from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial
from typing import Iterable, Sequence, Union

import numpy as np

from . import ratmat

MultiIndex = tuple[int, int, int]
Number = Union[int, Fraction]


def grlex_key(alpha: MultiIndex) -> tuple:
    return (sum(alpha), -alpha[0], -alpha[1], -alpha[2])


class Polynomial:
    """Immutable scalar polynomial ``sum c_alpha x^alpha`` with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        clean = {}
        if terms:
            for alpha, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[tuple(alpha)] = c
        self.terms: dict[MultiIndex, Fraction] = clean

    @staticmethod
    def _raw(terms: dict) -> "Polynomial":
        p = Polynomial.__new__(Polynomial)
        p.terms = {a: c for a, c in terms.items() if c}
        return p

    @classmethod
    def monomial(cls, alpha: Sequence[int], coef: Number = 1) -> "Polynomial":
        return cls({tuple(alpha): coef})

    @classmethod
    def constant(cls, c: Number) -> "Polynomial":
        return cls({(0, 0, 0): c})

    @classmethod
    def variable(cls, i: int) -> "Polynomial":
        alpha = [0, 0, 0]
        alpha[i] = 1
        return cls({tuple(alpha): 1})

    @classmethod
    def univariate(cls, coeffs: Sequence[Number], var: int) -> "Polynomial":
        """Polynomial ``sum_j coeffs[j] x_var^j``."""
        terms = {}
        for j, c in enumerate(coeffs):
            alpha = [0, 0, 0]
            alpha[var] = j
            terms[tuple(alpha)] = c
        return cls(terms)

    # -- queries ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=-1)

    def max_partial_degrees(self) -> MultiIndex:
        if not self.terms:
            return (-1, -1, -1)
        return tuple(max(a[i] for a in self.terms) for i in range(3))

    def monomials(self) -> list[MultiIndex]:
        return sorted(self.terms, key=grlex_key)

    def coefficient(self, alpha: MultiIndex) -> Fraction:
        return self.terms.get(tuple(alpha), Fraction(0))

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0) + c
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, VectorPolynomial):
            return other * self
        if not isinstance(other, Polynomial):
            c = Fraction(other)
            return Polynomial._raw({a: v * c for a, v in self.terms.items()})
        out: dict = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                key = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
                out[key] = out.get(key, 0) + ca * cb
        return Polynomial._raw(out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = Fraction(c)
        return Polynomial._raw({a: v / c for a, v in self.terms.items()})

    def __pow__(self, n: int):
        out = Polynomial.constant(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for a in self.monomials():
            c = self.terms[a]
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(a) if e)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # -- calculus --------------------------------------------------------
    def diff(self, i: int) -> "Polynomial":
        out = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return Polynomial._raw(out)

    def __call__(self, x: Sequence) -> Fraction | float:
        """Evaluate at one point (exact when the point is rational)."""
        total = 0
        for a, c in self.terms.items():
            total += c * x[0] ** a[0] * x[1] ** a[1] * x[2] ** a[2]
        return total

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Float evaluation at an array of points of shape (..., 3)."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        if not self.terms:
            return out
        deg = self.max_partial_degrees()
        powers = [np.stack([pts[..., i] ** e for e in range(deg[i] + 1)]) for i in range(3)]
        for a, c in self.terms.items():
            out += float(c) * powers[0][a[0]] * powers[1][a[1]] * powers[2][a[2]]
        return out

    def compose_affine(self, A: Sequence[Sequence], b: Sequence) -> "Polynomial":
        """Substitute ``x_i = sum_j A[i][j] y_j + b[i]`` (A may have 1-3 columns)."""
        ncol = len(A[0])
        lin = []
        for i in range(3):
            alpha = {(0, 0, 0): Fraction(b[i])}
            for j in range(ncol):
                e = [0, 0, 0]
                e[j] = 1
                alpha[tuple(e)] = Fraction(A[i][j])
            lin.append(Polynomial(alpha))
        deg = self.max_partial_degrees()
        pows = []
        for i in range(3):
            seq = [Polynomial.constant(1)]
            for _ in range(max(deg[i], 0)):
                seq.append(seq[-1] * lin[i])
            pows.append(seq)
        out = Polynomial()
        for a, c in self.terms.items():
            out = out + (pows[0][a[0]] * pows[1][a[1]] * pows[2][a[2]]) * c
        return out

    def integrate(self, domain: str) -> Fraction:
        """Exact integral over a reference domain.

        ``domain`` is one of ``tet``, ``hex`` (unit cube), ``tri`` (unit
        right triangle in (x1, x2)), ``square``, ``interval``.
        """
        return sum((c * monomial_integral(a, domain) for a, c in self.terms.items()), Fraction(0))


class VectorPolynomial:
    """Immutable triple of Polynomials."""

    __slots__ = ("c",)

    def __init__(self, comps: Sequence):
        comps = tuple(comps)
        if len(comps) != 3:
            raise ValueError("vector polynomials have three components")
        self.c: tuple[Polynomial, Polynomial, Polynomial] = tuple(
            p if isinstance(p, Polynomial) else Polynomial.constant(p) for p in comps)

    @classmethod
    def zero(cls):
        return cls([Polynomial(), Polynomial(), Polynomial()])

    @classmethod
    def unit(cls, i: int, p: Polynomial) -> "VectorPolynomial":
        comps = [Polynomial(), Polynomial(), Polynomial()]
        comps[i] = p
        return cls(comps)

    def __getitem__(self, i):
        return self.c[i]

    def __iter__(self):
        return iter(self.c)

    def is_zero(self):
        return all(p.is_zero() for p in self.c)

    @property
    def degree(self):
        return max(p.degree for p in self.c)

    def max_partial_degrees(self) -> MultiIndex:
        degs = [p.max_partial_degrees() for p in self.c]
        return tuple(max(d[i] for d in degs) for i in range(3))

    def __add__(self, other):
        return VectorPolynomial([a + b for a, b in zip(self.c, other.c)])

    def __sub__(self, other):
        return VectorPolynomial([a - b for a, b in zip(self.c, other.c)])

    def __neg__(self):
        return VectorPolynomial([-a for a in self.c])

    def __mul__(self, s):
        return VectorPolynomial([a * s for a in self.c])

    __rmul__ = __mul__

    def __truediv__(self, s):
        return VectorPolynomial([a / s for a in self.c])

    def __eq__(self, other):
        return isinstance(other, VectorPolynomial) and all(a == b for a, b in zip(self.c, other.c))

    def __hash__(self):
        return hash(self.c)

    def __repr__(self):
        return f"({self.c[0]!r}, {self.c[1]!r}, {self.c[2]!r})"

    def dot(self, w) -> Polynomial:
        """Dot product with another VectorPolynomial or a constant 3-vector."""
        if isinstance(w, VectorPolynomial):
            return self.c[0] * w.c[0] + self.c[1] * w.c[1] + self.c[2] * w.c[2]
        return self.c[0] * w[0] + self.c[1] * w[1] + self.c[2] * w[2]

    def matmul(self, M: Sequence[Sequence]) -> "VectorPolynomial":
        """Constant matrix times this vector: ``(M v)_i = sum_j M[i][j] v_j``."""
        return VectorPolynomial([sum((self.c[j] * M[i][j] for j in range(3)), Polynomial())
                                 for i in range(3)])

    def __call__(self, x):
        return tuple(p(x) for p in self.c)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        return np.stack([p.evaluate(pts) for p in self.c], axis=-1)

    def compose_affine(self, A, b) -> "VectorPolynomial":
        return VectorPolynomial([p.compose_affine(A, b) for p in self.c])


Poly = Union[Polynomial, VectorPolynomial]


# -- exact integrals ----------------------------------------------------------

@lru_cache(maxsize=None)
def monomial_integral(alpha: MultiIndex, domain: str) -> Fraction:
    a, b, c = alpha
    if domain == "tet":
        return Fraction(factorial(a) * factorial(b) * factorial(c), factorial(a + b + c + 3))
    if domain == "hex":
        return Fraction(1, (a + 1) * (b + 1) * (c + 1))
    if domain == "tri":
        if c:
            raise ValueError("triangle integrals take planar monomials")
        return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))
    if domain == "square":
        if c:
            raise ValueError("square integrals take planar monomials")
        return Fraction(1, (a + 1) * (b + 1))
    if domain == "interval":
        if b or c:
            raise ValueError("interval integrals take univariate monomials")
        return Fraction(1, a + 1)
    raise ValueError(f"unknown integration domain {domain!r}")


def exact_integral_reference(p: Polynomial, cell: str) -> Fraction:
    """Exact integral of ``p`` over the reference tetrahedron or unit cube."""
    if cell not in ("tet", "hex"):
        raise ValueError("cell must be 'tet' or 'hex'")
    return p.integrate(cell)


# -- differential operators -----------------------------------------------------

def grad(p: Polynomial) -> VectorPolynomial:
    return VectorPolynomial([p.diff(0), p.diff(1), p.diff(2)])


def div(v: VectorPolynomial) -> Polynomial:
    return v.c[0].diff(0) + v.c[1].diff(1) + v.c[2].diff(2)


def curl(v: VectorPolynomial) -> VectorPolynomial:
    a, b, c = v.c
    return VectorPolynomial([c.diff(1) - b.diff(2), a.diff(2) - c.diff(0), b.diff(0) - a.diff(1)])


def diff(op: str, p: Poly) -> Poly:
    """Apply ``grad`` (scalar→vector), ``curl`` (vector→vector) or ``div`` (vector→scalar)."""
    if op == "grad":
        if not isinstance(p, Polynomial):
            raise ValueError("grad expects a scalar polynomial")
        return grad(p)
    if op == "curl":
        if not isinstance(p, VectorPolynomial):
            raise ValueError("curl expects a vector polynomial")
        return curl(p)
    if op == "div":
        if not isinstance(p, VectorPolynomial):
            raise ValueError("div expects a vector polynomial")
        return div(p)
    raise ValueError(f"unknown operator {op!r}")


def poincare_apply(u: Polynomial) -> VectorPolynomial:
    """Right inverse of the divergence: x^alpha -> x x^alpha / (|alpha| + 3)."""
    comps = [{}, {}, {}]
    for a, c in u.terms.items():
        w = c / (sum(a) + 3)
        for i in range(3):
            b = list(a)
            b[i] += 1
            comps[i][tuple(b)] = w
    return VectorPolynomial([Polynomial._raw(t) for t in comps])


# -- spans ------------------------------------------------------------------------

class PolySpan:
    """Ordered list of linearly independent scalar or vector polynomials."""

    def __init__(self, basis: Iterable[Poly], arity: str):
        if arity not in ("scalar", "vector"):
            raise ValueError("arity must be 'scalar' or 'vector'")
        self.basis: tuple = tuple(basis)
        self.arity = arity
        for q in self.basis:
            if (arity == "scalar") != isinstance(q, Polynomial):
                raise ValueError("basis element does not match span arity")

    def __len__(self):
        return len(self.basis)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __iter__(self):
        return iter(self.basis)

    def __getitem__(self, i):
        return self.basis[i]

    def monomial_keys(self) -> list:
        """Sorted ambient coordinates: monomials (scalar) or (component, monomial)."""
        return ambient_keys(self.basis, self.arity)

    def coefficient_rows(self, keys: Sequence | None = None) -> list[list[Fraction]]:
        """Rows = basis elements, columns = ambient monomial coordinates."""
        keys = self.monomial_keys() if keys is None else keys
        return [coefficient_vector(q, keys) for q in self.basis]

    def rank(self) -> int:
        if not self.basis:
            return 0
        return ratmat.rank(self.coefficient_rows())

    def is_independent(self) -> bool:
        return self.rank() == self.dim

    def contains(self, q: Poly) -> bool:
        return self.contains_all([q])

    def contains_all(self, qs: Sequence[Poly]) -> bool:
        """True when every q lies in the span (one rank comparison)."""
        keys = ambient_keys(list(self.basis) + list(qs), self.arity)
        rows = [coefficient_vector(b, keys) for b in self.basis]
        base = ratmat.rank(rows) if rows else 0
        return ratmat.rank(rows + [coefficient_vector(q, keys) for q in qs]) == base

    def __add__(self, other: "PolySpan") -> "PolySpan":
        if other.arity != self.arity:
            raise ValueError("cannot join spans of different arity")
        return PolySpan(self.basis + other.basis, self.arity)

    def to_json(self) -> str:
        out = []
        for q in self.basis:
            comps = [q] if isinstance(q, Polynomial) else list(q.c)
            out.append([[{"exponents": list(a), "numerator": c.numerator, "denominator": c.denominator}
                         for a, c in ((a, p.terms[a]) for a in p.monomials())] for p in comps])
        return json.dumps({"arity": self.arity, "basis": out})


def ambient_keys(polys: Iterable[Poly], arity: str) -> list:
    if arity == "scalar":
        mons = set()
        for p in polys:
            mons.update(p.terms)
        return sorted(mons, key=grlex_key)
    mons = set()
    for v in polys:
        for i, p in enumerate(v.c):
            mons.update((i, a) for a in p.terms)
    return sorted(mons, key=lambda t: (t[0], grlex_key(t[1])))


def coefficient_vector(q: Poly, keys: Sequence) -> list[Fraction]:
    if isinstance(q, Polynomial):
        return [q.terms.get(a, Fraction(0)) for a in keys]
    return [q.c[i].terms.get(a, Fraction(0)) for i, a in keys]


def from_coefficients(keys: Sequence, coeffs: Sequence, arity: str) -> Poly:
    if arity == "scalar":
        return Polynomial({a: c for a, c in zip(keys, coeffs)})
    comps = [{}, {}, {}]
    for (i, a), c in zip(keys, coeffs):
        comps[i][a] = c
    return VectorPolynomial([Polynomial(t) for t in comps])


def _monomials_total(deg: int, nvars: int) -> list[MultiIndex]:
    if deg < 0:
        return []
    out = []
    for e in product(range(deg + 1), repeat=nvars):
        if sum(e) <= deg:
            out.append(tuple(e) + (0,) * (3 - nvars))
    return sorted(out, key=grlex_key)


def _monomials_homogeneous(deg: int, nvars: int = 3) -> list[MultiIndex]:
    return [a for a in _monomials_total(deg, nvars) if sum(a) == deg]


def _monomials_box(degs: Sequence[int]) -> list[MultiIndex]:
    if any(d < 0 for d in degs):
        return []
    degs = list(degs) + [0] * (3 - len(degs))
    return sorted(product(*(range(d + 1) for d in degs)), key=grlex_key)


def monomial_list(kind: str, degrees) -> list[MultiIndex]:
    if kind == "P":
        return _monomials_total(degrees, 3)
    if kind == "Ptilde":
        return _monomials_homogeneous(degrees, 3) if degrees >= 0 else []
    if kind == "Q":
        degs = (degrees,) * 3 if isinstance(degrees, int) else tuple(degrees)
        return _monomials_box(degs)
    if kind == "Pface":
        return _monomials_total(degrees, 2)
    if kind == "Qface":
        degs = (degrees,) * 2 if isinstance(degrees, int) else tuple(degrees)
        return _monomials_box(degs)
    if kind == "Pedge":
        return _monomials_total(degrees, 1)
    raise ValueError(f"unknown polynomial space kind {kind!r}")


def polynomial_space(kind: str, degrees, arity: str = "scalar") -> PolySpan:
    """Monomial basis of P_k, homogeneous P~_k, Q_{i,j,k}, or face/edge spaces.

    ``Pface``/``Qface`` live in the two face coordinates (x1, x2); ``Pedge``
    in x1 only.  Negative degrees give the empty span.
    """
    mons = monomial_list(kind, degrees)
    if arity == "scalar":
        return PolySpan([Polynomial.monomial(a) for a in mons], "scalar")
    if arity == "vector":
        basis = [VectorPolynomial.unit(i, Polynomial.monomial(a)) for i in range(3) for a in mons]
        return PolySpan(basis, "vector")
    raise ValueError("arity must be 'scalar' or 'vector'")


def vector_product_space(degs: Sequence[Sequence[int]]) -> PolySpan:
    """Q_{d0} x Q_{d1} x Q_{d2} with one anisotropic degree triple per component."""
    basis = []
    for i, d in enumerate(degs):
        basis += [VectorPolynomial.unit(i, Polynomial.monomial(a)) for a in _monomials_box(d)]
    return PolySpan(basis, "vector")


def nedelec_span(r: int, cell: str) -> PolySpan:
    """First-kind Nedelec shape space of degree r on the tet or hex."""
    if r < 1:
        raise ValueError("Nedelec degree must be at least 1")
    if cell == "hex":
        return vector_product_space([(r - 1, r, r), (r, r - 1, r), (r, r, r - 1)])
    if cell != "tet":
        raise ValueError("cell must be 'tet' or 'hex'")
    basis = list(polynomial_space("P", r - 1, "vector").basis)
    # S_r = {p homogeneous of degree r : x . p = 0} = x cross (homogeneous degree r-1 vectors)
    x = VectorPolynomial([Polynomial.variable(0), Polynomial.variable(1), Polynomial.variable(2)])
    cands = []
    for q in polynomial_space("Ptilde", r - 1, "vector").basis:
        cands.append(_cross(x, q))
    basis += _independent_subset(cands, "vector")
    return PolySpan(basis, "vector")


def _cross(a: VectorPolynomial, b: VectorPolynomial) -> VectorPolynomial:
    return VectorPolynomial([a.c[1] * b.c[2] - a.c[2] * b.c[1],
                             a.c[2] * b.c[0] - a.c[0] * b.c[2],
                             a.c[0] * b.c[1] - a.c[1] * b.c[0]])


def _independent_subset(polys: Sequence[Poly], arity: str, prefix: Sequence[Poly] = ()) -> list:
    """Members of ``polys`` that are independent of ``prefix`` and of earlier members."""
    allp = list(prefix) + list(polys)
    if not polys:
        return []
    keys = ambient_keys(allp, arity)
    cols = [coefficient_vector(q, keys) for q in allp]
    if not keys:
        return []
    mat = ratmat.to_flint([[cols[j][i] for j in range(len(cols))] for i in range(len(keys))])
    piv = ratmat.pivot_columns(mat)
    n0 = len(prefix)
    return [allp[j] for j in piv if j >= n0]


def independent_span(polys: Sequence[Poly], arity: str) -> PolySpan:
    """Deterministic basis of span(polys) picking leftmost independent members."""
    return PolySpan(_independent_subset(polys, arity), arity)


def quotient_complement(A: PolySpan, B: PolySpan) -> PolySpan:
    """Basis of a complement of B inside A, chosen among A's basis vectors in order."""
    if A.arity != B.arity:
        raise ValueError("spans of different arity")
    allp = list(B.basis) + list(A.basis)
    if not allp:
        return PolySpan([], A.arity)
    keys = ambient_keys(allp, A.arity)
    rows_a = [coefficient_vector(q, keys) for q in A.basis]
    rows_ab = rows_a + [coefficient_vector(q, keys) for q in B.basis]
    rank_a = ratmat.rank(rows_a) if rows_a else 0
    if rows_ab and ratmat.rank(rows_ab) != rank_a:
        raise ValueError("second span is not contained in the first")
    return PolySpan(_independent_subset(A.basis, A.arity, prefix=B.basis), A.arity)


def grad_span(S: PolySpan) -> PolySpan:
    """Independent basis of grad(S) (drops the constants' zero image)."""
    return independent_span([grad(p) for p in S.basis if not grad(p).is_zero()], "vector")


# -- barycentrics and bubbles ---------------------------------------------------------

def barycentric_tet() -> list[Polynomial]:
    x, y, z = (Polynomial.variable(i) for i in range(3))
    return [1 - x - y - z, x, y, z]


def bubble_tet() -> Polynomial:
    lam = barycentric_tet()
    return lam[0] * lam[1] * lam[2] * lam[3]


def bubble_hex() -> Polynomial:
    x, y, z = (Polynomial.variable(i) for i in range(3))
    return x * (1 - x) * y * (1 - y) * z * (1 - z)
