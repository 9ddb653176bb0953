"""Reference elements of the discrete complex Sigma^r -> V^r -> W^{r-1,k} -> Sigma^{+,k-1}.

Each element is described by a shape span (exact polynomials), an ordered
list of degree-of-freedom functionals, and a nodal basis obtained by
inverting the generalized Vandermonde matrix in exact arithmetic.

Local entity numbering
----------------------
tet vertices (0,0,0), (1,0,0), (0,1,0), (0,0,1); hex vertices in
lexicographic order with x fastest.  Edges and faces are sorted vertex
tuples listed in ascending order.  An entity is parametrized from its
first vertex along the directions to its second and third vertices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import flint
import numpy as np

from . import ratmat
from .polyalg import (MultiIndex, PolySpan, Polynomial, VectorPolynomial, bubble_hex, bubble_tet, curl, div,
                      grad_span, independent_span, monomial_integral, monomial_list,
                      nedelec_span, poincare_apply, polynomial_space, quotient_complement)
from .quadrature import rule

SPACES = ("Sigma", "V", "W", "Sigma+")


class UnisolvenceError(RuntimeError):
    """The generalized Vandermonde matrix is singular."""


# -- reference geometry ------------------------------------------------------------

def _hex_vertices():
    return [(i, j, k) for k in (0, 1) for j in (0, 1) for i in (0, 1)]


REF_VERTICES = {
    "tet": [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
    "hex": _hex_vertices(),
}


def _hex_edges():
    verts = REF_VERTICES["hex"]
    out = []
    for a in range(8):
        for b in range(a + 1, 8):
            if sum(x != y for x, y in zip(verts[a], verts[b])) == 1:
                out.append((a, b))
    return out


def _hex_faces():
    verts = REF_VERTICES["hex"]
    out = []
    for axis in range(3):
        for val in (0, 1):
            out.append(tuple(i for i, v in enumerate(verts) if v[axis] == val))
    return sorted(out)


REF_EDGES = {
    "tet": [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    "hex": _hex_edges(),
}
REF_FACES = {
    "tet": [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)],
    "hex": _hex_faces(),
}
CELL_DOMAIN = {"tet": "tet", "hex": "hex"}
FACE_DOMAIN = {"tet": "tri", "hex": "square"}


def entities(cell: str, dim: int) -> list[tuple[int, ...]]:
    if dim == 0:
        return [(i,) for i in range(len(REF_VERTICES[cell]))]
    if dim == 1:
        return REF_EDGES[cell]
    if dim == 2:
        return REF_FACES[cell]
    if dim == 3:
        return [tuple(range(len(REF_VERTICES[cell])))]
    raise ValueError("entity dimension must be 0..3")


def entity_param(cell: str, dim: int, idx: int):
    """(origin, direction columns) of the affine parametrization of a reference entity."""
    verts = REF_VERTICES[cell]
    if dim == 3:
        return (0, 0, 0), [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    ent = entities(cell, dim)[idx]
    p0 = verts[ent[0]]
    dirs = [[verts[ent[j]][i] - p0[i] for j in range(1, dim + 1)] for i in range(3)]
    return p0, dirs


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def face_orientation(cell: str, idx: int) -> int:
    """+1 if the parametrization normal t1 x t2 of a reference face points outward."""
    verts = REF_VERTICES[cell]
    face = REF_FACES[cell][idx]
    p0 = verts[face[0]]
    t1 = [verts[face[1]][i] - p0[i] for i in range(3)]
    t2 = [verts[face[2]][i] - p0[i] for i in range(3)]
    n = _cross(t1, t2)
    other = [v for i, v in enumerate(verts) if i not in face]
    centroid_other = [sum(Fraction(v[i]) for v in other) / len(other) for i in range(3)]
    inward = sum(n[i] * (centroid_other[i] - p0[i]) for i in range(3))
    return -1 if inward > 0 else 1


def face_domain(cell: str) -> str:
    return FACE_DOMAIN[cell]


def entity_domain(cell: str, dim: int) -> str:
    return {0: "point", 1: "interval", 2: FACE_DOMAIN[cell], 3: CELL_DOMAIN[cell]}[dim]


# -- functionals -------------------------------------------------------------------------

@dataclass(frozen=True)
class DofFunctional:
    """One degree of freedom on the reference cell.

    ``quantity`` is what gets integrated: the scalar value, the divergence, or
    the dot product with ``weight`` (a vector weight).  For entity moments the
    weight is a polynomial in the entity coordinates; ``frame`` names the
    direction the vector weight follows under a change of entity coordinates
    (edge tangent, face tangents t1/t2, face normal, or the cell frame).
    ``scale`` multiplies the integral over the parameter domain, so that
    1/length and 1/area normalizations are exact rationals.
    """

    kind: str
    entity: tuple[int, int]
    quantity: str
    weight: Polynomial | VectorPolynomial
    frame: str | None
    normalization: str
    scale: Fraction
    weight_index: int = 0
    mono: MultiIndex | None = None

    @property
    def is_point(self) -> bool:
        return self.entity[0] == 0

    def descriptor(self) -> dict:
        return {"kind": self.kind, "entity": list(self.entity), "quantity": self.quantity,
                "frame": self.frame, "normalization": self.normalization,
                "weight_index": self.weight_index,
                "weight": repr(self.weight)}


def _scale_for(norm: str, domain: str) -> Fraction:
    if norm == "1":
        return Fraction(1)
    measure = {"interval": Fraction(1), "tri": Fraction(1, 2), "square": Fraction(1),
               "tet": Fraction(1, 6), "hex": Fraction(1)}[domain]
    return 1 / measure


def _point_dofs(cell, kind, quantity):
    return [DofFunctional(kind, (0, i), quantity, Polynomial.constant(1), None, "1", Fraction(1))
            for i in range(len(REF_VERTICES[cell]))]


def _scalar_moments(cell, dim, kind, quantity, mons, norm):
    dom = entity_domain(cell, dim)
    out = []
    for e in range(len(entities(cell, dim))):
        for j, m in enumerate(mons):
            out.append(DofFunctional(kind, (dim, e), quantity, Polynomial.monomial(m), None, norm,
                                     _scale_for(norm, dom), j, m))
    return out


def _frame_moments(cell, dim, kind, frame_mons, norm, weight_frames):
    """Vector moments whose weight is (frame vector) x monomial, frames listed in order."""
    dom = entity_domain(cell, dim)
    out = []
    for e in range(len(entities(cell, dim))):
        _, dirs = entity_param(cell, dim, e)
        cols = [[dirs[i][j] for i in range(3)] for j in range(dim)]
        j = 0
        for fname, mons in zip(weight_frames, frame_mons):
            if fname == "tangent":
                vec = cols[0]
            elif fname == "t1":
                vec = cols[0]
            elif fname == "t2":
                vec = cols[1]
            elif fname == "normal":
                vec = [c * face_orientation(cell, e) for c in _cross(cols[0], cols[1])]
            else:
                raise ValueError(fname)
            for m in mons:
                w = VectorPolynomial([Polynomial.monomial(m, vec[i]) for i in range(3)])
                out.append(DofFunctional(kind, (dim, e), "dot", w, fname, norm, _scale_for(norm, dom), j, m))
                j += 1
    return out


def _interior_vector_moments(cell, kind, span: PolySpan):
    return [DofFunctional(kind, (3, 0), "dot", q, "cell", "1", Fraction(1), j)
            for j, q in enumerate(span.basis)]


# -- spans -----------------------------------------------------------------------------------

def _check_cell(cell):
    if cell not in ("tet", "hex"):
        raise ValueError("cell must be 'tet' or 'hex'")


def _check_rk(r: int, k: int):
    if k < 2:
        raise ValueError("order k must be at least 2")
    if r not in (k - 1, k, k + 1) or r < 1:
        raise ValueError("family r must be one of k-1, k, k+1 (and r >= 1)")


def lagrange_span(cell: str, r: int) -> PolySpan:
    _check_cell(cell)
    return polynomial_space("P" if cell == "tet" else "Q", r)


@lru_cache(maxsize=None)
def sigma_plus_span(cell: str, k: int) -> PolySpan:
    """P_{k-1} (+ B_t for k <= 4) on tets, Q_{k-1} (+ B_c for k = 2) on hexes."""
    _check_cell(cell)
    if k < 2:
        raise ValueError("order k must be at least 2")
    base = list(lagrange_span(cell, k - 1).basis)
    if cell == "tet" and k <= 4:
        base.append(bubble_tet())
    if cell == "hex" and k == 2:
        base.append(bubble_hex())
    return PolySpan(base, "scalar")


@lru_cache(maxsize=None)
def curl_nedelec_span(cell: str, r: int) -> PolySpan:
    return independent_span([curl(v) for v in nedelec_span(r, cell).basis], "vector")


@lru_cache(maxsize=None)
def shape_span_W(cell: str, r: int, k: int) -> PolySpan:
    """curl(Nedelec_r) followed by the Poincare image of Sigma^{+,k-1}."""
    _check_cell(cell)
    _check_rk(r, k)
    lifts = [poincare_apply(p) for p in sigma_plus_span(cell, k).basis]
    return PolySpan(list(curl_nedelec_span(cell, r).basis) + lifts, "vector")


def w_dimension_formula(r: int, k: int) -> int:
    """Closed-form tet dimension of W^{r-1,k}."""
    return (r + 2) * (r + 3) * (2 * r - 1) // 6 + k * (k + 1) * (k + 2) // 6 + (1 if k >= 5 else 2)


@lru_cache(maxsize=None)
def interior_test_span(cell: str, r: int, k: int) -> PolySpan:
    """Interior weights: grad of P_{k-5}/Q_{k-3} plus a complement of grad P_{r-1}/Q_{r-1}."""
    if cell == "tet":
        grads = grad_span(polynomial_space("P", k - 5))
        ambient = polynomial_space("P", r - 2, "vector")
        sub = grad_span(polynomial_space("P", r - 1))
    else:
        grads = grad_span(polynomial_space("Q", k - 3))
        ambient = nedelec_span(r - 1, "hex") if r >= 2 else PolySpan([], "vector")
        sub = grad_span(polynomial_space("Q", r - 1))
    comp = quotient_complement(ambient, sub) if ambient.dim else PolySpan([], "vector")
    return PolySpan(list(grads.basis) + list(comp.basis), "vector")


# -- DOF tables ---------------------------------------------------------------------------

def _lagrange_dofs(cell: str, degree: int, interior_degree: int | None = None) -> list[DofFunctional]:
    dofs = _point_dofs(cell, "lagrange-point", "value")
    dofs += _scalar_moments(cell, 1, "lagrange-edge-moment", "value", monomial_list("Pedge", degree - 2), "1/length")
    if cell == "tet":
        fm = monomial_list("Pface", degree - 3)
        im = monomial_list("P", degree - 4 if interior_degree is None else interior_degree)
    else:
        fm = monomial_list("Qface", degree - 2)
        im = monomial_list("Q", degree - 2 if interior_degree is None else interior_degree)
    dofs += _scalar_moments(cell, 2, "lagrange-face-moment", "value", fm, "1/area")
    dofs += _scalar_moments(cell, 3, "lagrange-interior-moment", "value", im, "1/volume")
    return dofs


def _nedelec_dofs(cell: str, r: int) -> list[DofFunctional]:
    dofs = _frame_moments(cell, 1, "nedelec-edge-moment", [monomial_list("Pedge", r - 1)], "1", ["tangent"])
    if cell == "tet":
        fm = monomial_list("Pface", r - 2)
        dofs += _frame_moments(cell, 2, "nedelec-face-moment", [fm, fm], "1/area", ["t1", "t2"])
        inner = polynomial_space("P", r - 3, "vector")
    else:
        dofs += _frame_moments(cell, 2, "nedelec-face-moment",
                               [monomial_list("Qface", (r - 1, r - 2)), monomial_list("Qface", (r - 2, r - 1))],
                               "1/area", ["t1", "t2"])
        from .polyalg import vector_product_space
        inner = vector_product_space([(r - 1, r - 2, r - 2), (r - 2, r - 1, r - 2), (r - 2, r - 2, r - 1)]) \
            if r >= 2 else PolySpan([], "vector")
    dofs += _interior_vector_moments(cell, "nedelec-interior-moment", inner)
    return dofs


def _w_dofs(cell: str, r: int, k: int) -> list[DofFunctional]:
    dofs = _point_dofs(cell, "vertex-div-value", "div")
    dofs += _scalar_moments(cell, 1, "edge-div-moment", "div", monomial_list("Pedge", k - 3), "1/length")
    face_div = monomial_list("Pface", k - 4) if cell == "tet" else monomial_list("Qface", k - 3)
    face_nrm = monomial_list("Pface", r - 1) if cell == "tet" else monomial_list("Qface", r - 1)
    dom = FACE_DOMAIN[cell]
    for e in range(len(REF_FACES[cell])):
        j = 0
        for m in face_div:
            dofs.append(DofFunctional("face-div-moment", (2, e), "div", Polynomial.monomial(m), None, "1/area",
                                      _scale_for("1/area", dom), j, m))
            j += 1
        for d in _frame_moments(cell, 2, "face-normal-moment", [face_nrm], "1", ["normal"]):
            if d.entity == (2, e):
                dofs.append(DofFunctional(d.kind, d.entity, d.quantity, d.weight, d.frame, d.normalization,
                                          d.scale, j, d.mono))
                j += 1
    dofs += _interior_vector_moments(cell, "interior-moment", interior_test_span(cell, r, k))
    return dofs


def dof_set(space: str, cell: str, r: int, k: int) -> list[DofFunctional]:
    """Ordered DOF list: vertices, edges, faces, interior; weights in graded-lex order."""
    _check_cell(cell)
    if space == "Sigma":
        return _lagrange_dofs(cell, r)
    if space == "V":
        return _nedelec_dofs(cell, r)
    if space == "W":
        _check_rk(r, k)
        return _w_dofs(cell, r, k)
    if space == "Sigma+":
        interior = max(k - 5, 0) if cell == "tet" else max(k - 3, 0)
        return _lagrange_dofs(cell, k - 1, interior_degree=interior)
    raise ValueError(f"unknown space {space!r}")


def shape_span(space: str, cell: str, r: int, k: int) -> PolySpan:
    if space == "Sigma":
        return lagrange_span(cell, r)
    if space == "V":
        return nedelec_span(r, cell)
    if space == "W":
        return shape_span_W(cell, r, k)
    if space == "Sigma+":
        return sigma_plus_span(cell, k)
    raise ValueError(f"unknown space {space!r}")


# -- exact application of functionals ------------------------------------------------------

class _EntityIntegrals:
    """Cache of integrals of restricted monomials against entity monomials."""

    def __init__(self, cell: str):
        self.cell = cell
        self._restricted: dict = {}

    def restricted(self, ent: tuple[int, int], alpha: MultiIndex) -> Polynomial:
        key = (ent, alpha)
        p = self._restricted.get(key)
        if p is None:
            dim, idx = ent
            if dim == 3:
                p = Polynomial.monomial(alpha)
            else:
                origin, dirs = entity_param(self.cell, dim, idx)
                p = Polynomial.monomial(alpha).compose_affine(dirs, origin)
            self._restricted[key] = p
        return p

    def moment(self, ent: tuple[int, int], alpha: MultiIndex, weight: Polynomial) -> Fraction:
        dom = entity_domain(self.cell, ent[0])
        p = self.restricted(ent, alpha)
        total = Fraction(0)
        for a, c in p.terms.items():
            for b, d in weight.terms.items():
                total += c * d * monomial_integral((a[0] + b[0], a[1] + b[1], a[2] + b[2]), dom)
        return total


def _vertex(cell, ent):
    return REF_VERTICES[cell][ent[1]]


def dual_row(f: DofFunctional, keys: Sequence, cell: str, cache: _EntityIntegrals | None = None) -> list[Fraction]:
    """Values of one functional on each ambient monomial coordinate (exact)."""
    cache = cache or _EntityIntegrals(cell)
    row = []
    for key in keys:
        if f.quantity == "value":
            alpha = key
            if f.is_point:
                v = _vertex(cell, f.entity)
                row.append(Fraction(v[0] ** alpha[0] * v[1] ** alpha[1] * v[2] ** alpha[2]))
            else:
                row.append(f.scale * cache.moment(f.entity, alpha, f.weight))
            continue
        i, alpha = key
        if f.quantity == "div":
            if alpha[i] == 0:
                row.append(Fraction(0))
                continue
            beta = list(alpha)
            beta[i] -= 1
            beta = tuple(beta)
            if f.is_point:
                v = _vertex(cell, f.entity)
                row.append(Fraction(alpha[i] * v[0] ** beta[0] * v[1] ** beta[1] * v[2] ** beta[2]))
            else:
                row.append(alpha[i] * f.scale * cache.moment(f.entity, beta, f.weight))
        else:  # dot
            w = f.weight.c[i]
            row.append(f.scale * cache.moment(f.entity, alpha, w) if not w.is_zero() else Fraction(0))
    return row


def apply_reference(f: DofFunctional, u, cell: str) -> Fraction:
    """Exact value of a reference functional on a polynomial (scalar or vector)."""
    if isinstance(u, Polynomial):
        keys = sorted(u.terms)
        coeffs = [u.terms[a] for a in keys]
    else:
        keys = [(i, a) for i in range(3) for a in sorted(u.c[i].terms)]
        coeffs = [u.c[i].terms[a] for i, a in keys]
    row = dual_row(f, keys, cell)
    return sum((c * v for c, v in zip(coeffs, row)), Fraction(0))


# -- element + nodal basis ---------------------------------------------------------------------

@dataclass
class NodalBasis:
    """Nodal basis in ambient monomial coordinates.

    ``coeffs[i, j]`` is the coefficient of ambient coordinate ``keys[j]`` in
    nodal function ``i`` (exact); ``coeffs_float`` its float image.
    """

    keys: list
    coeffs: flint.fmpq_mat
    coeffs_float: np.ndarray
    vandermonde: flint.fmpq_mat
    condition: float
    legendre_keys: list
    legendre_coeffs: np.ndarray


@dataclass
class ElementDef:
    space: str
    cell: str
    r: int
    k: int
    span: PolySpan
    dofs: list[DofFunctional]
    _nodal: NodalBasis | None = field(default=None, repr=False)
    _dual: flint.fmpq_mat | None = field(default=None, repr=False)
    _polys: list | None = field(default=None, repr=False)
    _columns: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.span.dim

    @property
    def is_vector(self) -> bool:
        return self.span.arity == "vector"

    def entity_dofs(self) -> dict[tuple[int, int], list[int]]:
        out: dict = {}
        for i, d in enumerate(self.dofs):
            out.setdefault(d.entity, []).append(i)
        return out

    def dofs_per_entity(self) -> dict[int, int]:
        """Number of DOFs carried by each entity of a given dimension."""
        out = {}
        for (dim, _), idx in self.entity_dofs().items():
            out[dim] = len(idx)
        for dim in range(4):
            out.setdefault(dim, 0)
        return out

    def dual_matrix(self) -> flint.fmpq_mat:
        """D[a, j] = dof a applied to ambient monomial coordinate keys[j] (exact, cached)."""
        if self._dual is None:
            keys = self.span.monomial_keys()
            cache = _EntityIntegrals(self.cell)
            self._dual = ratmat.to_flint([dual_row(f, keys, self.cell, cache) for f in self.dofs], ncols=len(keys))
        return self._dual

    def vandermonde(self) -> flint.fmpq_mat:
        keys = self.span.monomial_keys()
        C = ratmat.to_flint(self.span.coefficient_rows(keys), ncols=len(keys))
        return self.dual_matrix() * C.transpose()

    def is_unisolvent(self) -> bool:
        if len(self.dofs) != self.dim:
            return False
        return self.vandermonde().rank() == self.dim

    def apply_dofs(self, u) -> list[Fraction]:
        """Exact values of every functional on a polynomial field (columns cached per monomial)."""
        if isinstance(u, Polynomial):
            items = [(a, c) for a, c in u.terms.items()]
        else:
            items = [((i, a), c) for i in range(3) for a, c in u.c[i].terms.items()]
        missing = [key for key, _ in items if key not in self._columns]
        if missing:
            cache = _EntityIntegrals(self.cell)
            rows = [dual_row(f, missing, self.cell, cache) for f in self.dofs]
            for j, key in enumerate(missing):
                self._columns[key] = [row[j] for row in rows]
        out = [Fraction(0)] * len(self.dofs)
        for key, c in items:
            col = self._columns[key]
            for a in range(len(out)):
                if col[a]:
                    out[a] += c * col[a]
        return out

    @property
    def nodal(self) -> NodalBasis:
        if self._nodal is None:
            self._nodal = build_nodal_basis(self)
        return self._nodal

    # float tabulation ---------------------------------------------------------
    def tabulate(self, points: np.ndarray, what: str = "value") -> np.ndarray:
        """Nodal basis on reference points.

        what: ``value`` -> (npts, ndof) scalar or (npts, ndof, 3) vector;
        ``div`` -> (npts, ndof); ``graddiv`` -> (npts, ndof, 3);
        ``grad`` (scalar spaces) -> (npts, ndof, 3); ``curl`` -> (npts, ndof, 3).
        """
        nb = self.nodal
        return tabulate_keys(nb.legendre_keys, nb.legendre_coeffs, self.is_vector, points, what)

    def nodal_polynomials(self) -> list:
        if self._polys is None:
            from .polyalg import from_coefficients
            nb = self.nodal
            rows = ratmat.from_flint(nb.coeffs)
            self._polys = [from_coefficients(nb.keys, row, self.span.arity) for row in rows]
        return self._polys


def build_nodal_basis(element: ElementDef) -> NodalBasis:
    if len(element.dofs) != element.dim:
        raise UnisolvenceError(f"{len(element.dofs)} functionals for a span of dimension {element.dim}")
    keys = element.span.monomial_keys()
    V = element.vandermonde()
    if V.rank() != element.dim:
        raise UnisolvenceError(f"singular Vandermonde for {element.space} {element.cell} r={element.r} k={element.k}")
    C = ratmat.to_flint(element.span.coefficient_rows(keys), ncols=len(keys))
    X = V.transpose().inv()
    coeffs = X * C
    Vf = ratmat.to_float(V)
    cond = float(np.linalg.cond(Vf)) if Vf.size else 1.0
    lkeys, lcoeffs = legendre_representation(keys, coeffs, element.span.arity == "vector")
    return NodalBasis(keys, coeffs, ratmat.to_float(coeffs), V, cond, lkeys, lcoeffs)


@lru_cache(maxsize=None)
def element(space: str, cell: str, r: int, k: int) -> ElementDef:
    """Cached element definition; parameters unused by a space are ignored."""
    _check_cell(cell)
    if space == "Sigma":
        if r < 1:
            raise ValueError("Lagrange degree must be at least 1")
        key_r, key_k = r, 0
    elif space == "V":
        if r < 1:
            raise ValueError("Nedelec degree must be at least 1")
        key_r, key_k = r, 0
    elif space == "W":
        _check_rk(r, k)
        key_r, key_k = r, k
    elif space == "Sigma+":
        if k < 2:
            raise ValueError("order k must be at least 2")
        key_r, key_k = 0, k
    else:
        raise ValueError(f"unknown space {space!r}")
    if (key_r, key_k) != (r, k):
        return element(space, cell, key_r, key_k)
    return ElementDef(space, cell, r, k, shape_span(space, cell, r, k), dof_set(space, cell, r, k))


def element_complex(cell: str, r: int, k: int) -> tuple[ElementDef, ElementDef, ElementDef, ElementDef]:
    _check_rk(r, k)
    return (element("Sigma", cell, r, 0), element("V", cell, r, 0), element("W", cell, r, k),
            element("Sigma+", cell, 0, k))


# -- float tabulation ---------------------------------------------------------------------------
#
# Nodal coefficients are exact in monomials, but monomial evaluation loses
# digits for the higher-order hex elements.  Tabulation therefore goes
# through an exact change of basis to tensor products of shifted Legendre
# polynomials on [0, 1], whose coefficients stay moderate.

@lru_cache(maxsize=None)
def _monomial_to_legendre(deg: int) -> tuple[tuple[Fraction, ...], ...]:
    """Row a: coefficients of x^a in the shifted Legendre basis P~_0..P~_deg."""
    from math import comb
    # P~_n(x) = sum_i (-1)^(n+i) C(n,i) C(n+i,i) x^i
    P = [[Fraction((-1) ** (n + i) * comb(n, i) * comb(n + i, i)) if i <= n else Fraction(0)
          for i in range(deg + 1)] for n in range(deg + 1)]
    # rows of P are Legendre polynomials in monomials, so x^a = sum_n (P^-1)[a][n] P~_n
    Pinv = ratmat.from_flint(ratmat.to_flint(P).inv())
    return tuple(tuple(Pinv[a][n] for n in range(deg + 1)) for a in range(deg + 1))


def legendre_representation(keys: list, coeffs: flint.fmpq_mat, vector: bool):
    """(legendre keys, float coefficient matrix) equivalent to the monomial data."""
    maxdeg = max((max(k if not vector else k[1]) for k in keys), default=0)
    conv = _monomial_to_legendre(maxdeg)
    lkeys: dict = {}
    entries: dict = {}
    for col, key in enumerate(keys):
        comp, alpha = (None, key) if not vector else key
        for j0 in range(alpha[0] + 1):
            c0 = conv[alpha[0]][j0]
            if not c0:
                continue
            for j1 in range(alpha[1] + 1):
                c1 = conv[alpha[1]][j1]
                if not c1:
                    continue
                for j2 in range(alpha[2] + 1):
                    c2 = conv[alpha[2]][j2]
                    if not c2:
                        continue
                    lk = (j0, j1, j2) if not vector else (comp, (j0, j1, j2))
                    idx = lkeys.setdefault(lk, len(lkeys))
                    entries[(col, idx)] = entries.get((col, idx), 0) + c0 * c1 * c2
    rows = [[Fraction(0)] * len(lkeys) for _ in keys]
    for (i, j), v in entries.items():
        rows[i][j] = v
    Tm = ratmat.to_flint(rows, ncols=len(lkeys))
    return list(lkeys), ratmat.to_float(coeffs * Tm)


def _legendre_table(points: np.ndarray, maxdeg: int) -> np.ndarray:
    """L[d, j, i, p]: d-th derivative of P~_j in coordinate i at point p (d <= 2)."""
    pts = np.asarray(points, dtype=float)
    t = 2 * pts - 1
    out = np.zeros((3, maxdeg + 1, 3, len(pts)))
    for j in range(maxdeg + 1):
        c = np.zeros(j + 1)
        c[j] = 1
        for d in range(3):
            cd = np.polynomial.legendre.legder(c, d) * 2.0 ** d if d else c
            out[d, j] = np.polynomial.legendre.legval(t, cd).T if len(cd) else 0.0
    return out


def _key_eval(L, j, derivs=()):
    order = [0, 0, 0]
    for i in derivs:
        order[i] += 1
    return L[order[0], j[0], 0] * L[order[1], j[1], 1] * L[order[2], j[2], 2]


def tabulate_keys(keys, coeffs: np.ndarray, vector: bool, points: np.ndarray, what: str) -> np.ndarray:
    """Evaluate functions given as (keys, coeffs) in the shifted-Legendre tensor basis."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    maxdeg = max((max(k if not vector else k[1]) for k in keys), default=0)
    L = _legendre_table(points, maxdeg)
    if not vector:
        if what == "value":
            return np.stack([_key_eval(L, j) for j in keys], axis=1) @ coeffs.T
        if what == "grad":
            return np.stack([np.stack([_key_eval(L, j, (d,)) for j in keys], axis=1) @ coeffs.T
                             for d in range(3)], axis=-1)
        raise ValueError(f"cannot tabulate {what!r} for a scalar element")
    zero = np.zeros(len(points))
    if what == "value":
        return np.stack([np.stack([_key_eval(L, j) if c == i else zero for c, j in keys], axis=1) @ coeffs.T
                         for i in range(3)], axis=-1)
    if what == "div":
        return np.stack([_key_eval(L, j, (c,)) for c, j in keys], axis=1) @ coeffs.T
    if what == "graddiv":
        return np.stack([np.stack([_key_eval(L, j, (c, d)) for c, j in keys], axis=1) @ coeffs.T
                         for d in range(3)], axis=-1)
    if what == "curl":
        pairs = [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)]  # d_d1 v_c1 - d_d2 v_c2
        out = []
        for c1, d1, c2, d2 in pairs:
            M = np.stack([(_key_eval(L, j, (d1,)) if c == c1 else zero)
                          - (_key_eval(L, j, (d2,)) if c == c2 else zero) for c, j in keys], axis=1)
            out.append(M @ coeffs.T)
        return np.stack(out, axis=-1)
    raise ValueError(f"unknown tabulation {what!r}")


# -- quadrature application to analytic fields --------------------------------------------------

@lru_cache(maxsize=None)
def quadrature_functionals(space: str, cell: str, r: int, k: int, degree: int):
    """Float quadrature version of every functional of an element.

    Returns a list of (quantity, points (n,3), weights) where weights are
    (n,) for scalar quantities and (n,3) for dot products; the functional
    value is sum(weights * quantity(points)).
    """
    el = element(space, cell, r, k)
    out = []
    for f in el.dofs:
        dim, idx = f.entity
        if dim == 0:
            out.append((f.quantity, np.array([REF_VERTICES[cell][idx]], dtype=float), np.ones(1)))
            continue
        dom = entity_domain(cell, dim)
        qr = rule(dom, degree)
        s = np.zeros((qr.size, 3))
        s[:, :qr.points.shape[1]] = qr.points
        origin, dirs = entity_param(cell, dim, idx)
        A = np.array(dirs, dtype=float)
        pts = s[:, :A.shape[1]] @ A.T + np.array(origin, dtype=float)
        if f.quantity == "dot":
            w = f.weight.evaluate(s) * (qr.weights * float(f.scale))[:, None]
        else:
            w = f.weight.evaluate(s) * qr.weights * float(f.scale)
        out.append((f.quantity, pts, w))
    return out


def export_tabulation(el: ElementDef) -> str:
    """JSON dump of span, DOF descriptors, nodal coefficients and condition estimate."""
    nb = el.nodal
    rows = ratmat.from_flint(nb.coeffs)
    keys = [list(k) if not el.is_vector else [k[0], list(k[1])] for k in nb.keys]
    return json.dumps({
        "space": el.space, "cell": el.cell, "r": el.r, "k": el.k, "dim": el.dim,
        "span": json.loads(el.span.to_json()),
        "dofs": [d.descriptor() for d in el.dofs],
        "keys": keys,
        "nodal": [[[c.numerator, c.denominator] for c in row] for row in rows],
        "condition": nb.condition,
    })


# -- element self-checks ------------------------------------------------------------------------

@dataclass
class ElementReport:
    cell: str
    r: int
    k: int
    dim: int
    expected_dim: int
    unisolvent: bool
    contains_P: bool
    direct_sum: bool
    div_onto: bool

    @property
    def passed(self) -> bool:
        return (self.dim == self.expected_dim and self.unisolvent and self.contains_P
                and self.direct_sum and self.div_onto)


def element_report(cell: str, r: int, k: int) -> ElementReport:
    """Unisolvence, dimension count, inclusion of vector P_{r-1} and local exactness of W^{r-1,k}.

    The expected dimension is the closed form on tets and dim curl V^r + dim Sigma^+ on hexes.
    """
    _check_rk(r, k)
    el = element("W", cell, r, k)
    span = el.span
    curls = curl_nedelec_span(cell, r)
    splus = sigma_plus_span(cell, k)
    expected = w_dimension_formula(r, k) if cell == "tet" else curls.dim + splus.dim
    contains = span.contains_all([VectorPolynomial.unit(i, Polynomial.monomial(a))
                                  for i in range(3) for a in monomial_list("P", r - 1)])
    divs = PolySpan([div(q) for q in span.basis], "scalar")
    onto = divs.rank() == splus.dim and divs.contains_all(list(splus.basis))
    return ElementReport(cell, r, k, el.dim, expected, el.is_unisolvent(), contains,
                         span.is_independent(), onto)


def apply_dof(f: DofFunctional, u, cell: str, amap=None) -> Fraction:
    """Value of a reference functional on a polynomial field.

    With an affine map, ``u`` is a physical field and the functional sees its
    pullback: the contravariant Piola pullback det(B) B^{-1} u o F for vector
    fields, plain composition for scalars.
    """
    if amap is not None:
        uhat = u.compose_affine(amap.B, amap.b)
        if isinstance(uhat, VectorPolynomial):
            uhat = uhat.matmul(amap.inverse_B()) * amap.detB
        u = uhat
    return apply_reference(f, u, cell)
