"""Quad-div bilinear form, load vectors, sparse assembly and the manufactured problem.

Local matrices are exact: the nodal basis is polynomial and the cell maps
are affine, so every entry is a rational number computed from monomial
integrals on the reference cell.  Right-hand sides and error functionals
involve the degree-17 manufactured data; they use Gauss rules whose
exactness degree covers the full integrand, so the only error left is
floating-point roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import flint
import numpy as np
import scipy.sparse as sp

from . import kernels, ratmat
from .fespace import GlobalSpace, free_dofs
from .fields import SeparableField
from .mesh import AffineMap
from .polyalg import Polynomial, VectorPolynomial, div, grad, monomial_integral
from .quadrature import QuadratureRule, rule  # noqa: F401  (re-exported)
from .refelem import ElementDef


class DegenerateSystemError(ValueError):
    """Raised when every DOF is constrained."""


# -- exact reference Gram matrices -------------------------------------------------------------

def _coeff_matrix(polys: list[Polynomial]) -> tuple[list, flint.fmpq_mat]:
    keys = sorted({a for p in polys for a in p.terms})
    pos = {a: i for i, a in enumerate(keys)}
    rows = [[Fraction(0)] * len(keys) for _ in polys]
    for r, p in enumerate(polys):
        for a, c in p.terms.items():
            rows[r][pos[a]] = c
    return keys, ratmat.to_flint(rows, ncols=len(keys))


def _gram(keys_a: list, keys_b: list, cell: str) -> flint.fmpq_mat:
    return ratmat.to_flint([[monomial_integral((a[0] + b[0], a[1] + b[1], a[2] + b[2]), cell) for b in keys_b]
                            for a in keys_a], ncols=len(keys_b))


def _pair_grams(fields: list[list[Polynomial]], cell: str) -> list[list[flint.fmpq_mat]]:
    """G[c][d][i, j] = integral over the reference cell of fields[c][i] * fields[d][j]."""
    mats = [_coeff_matrix(f) for f in fields]
    out = []
    for kc, Cc in mats:
        row = []
        for kd, Cd in mats:
            if not kc or not kd:
                row.append(flint.fmpq_mat(Cc.nrows(), Cd.nrows()))
            else:
                row.append(Cc * _gram(kc, kd, cell) * Cd.transpose())
        out.append(row)
    return out


@lru_cache(maxsize=None)
def reference_grams(space: str, cell: str, r: int, k: int) -> dict[str, list]:
    """Exact Gram blocks of the reference nodal basis: value, div and grad-div."""
    from .refelem import element
    el = element(space, cell, r, k)
    polys = el.nodal_polynomials()
    value = [[p.c[c] for p in polys] for c in range(3)]
    divs = [div(p) for p in polys]
    gd = [grad(d) for d in divs]
    graddiv = [[g.c[c] for g in gd] for c in range(3)]
    return {"value": _pair_grams(value, cell), "div": _pair_grams([divs], cell),
            "graddiv": _pair_grams(graddiv, cell)}


def _combine(blocks: list[list[flint.fmpq_mat]], G: list[list[Fraction]], scale: Fraction) -> flint.fmpq_mat:
    out = flint.fmpq_mat(blocks[0][0].nrows(), blocks[0][0].ncols())
    for c in range(3):
        for d in range(3):
            if G[c][d]:
                out += blocks[c][d] * flint.fmpq(G[c][d].numerator, G[c][d].denominator)
    return out * flint.fmpq(scale.numerator, scale.denominator)


def local_blocks(el: ElementDef, amap: AffineMap) -> dict[str, flint.fmpq_mat]:
    """Exact physical mass, div-div and grad-div matrices of the pushed reference nodal basis."""
    if el.space != "W":
        raise ValueError("the quad-div form is defined on W")
    gr = reference_grams(el.space, el.cell, el.r, el.k)
    B = amap.B
    det = amap.detB
    BtB = [[sum(B[a][c] * B[a][d] for a in range(3)) for d in range(3)] for c in range(3)]
    Binv = amap.inverse_B()
    BiBiT = [[sum(Binv[c][a] * Binv[d][a] for a in range(3)) for d in range(3)] for c in range(3)]
    return {
        "mass": _combine(gr["value"], BtB, 1 / det),
        "div": gr["div"][0][0] * flint.fmpq(det.denominator, det.numerator),
        "graddiv": _combine(gr["graddiv"], BiBiT, 1 / det),
    }


def local_matrix_quaddiv(amap: AffineMap, el: ElementDef, M: flint.fmpq_mat | None = None) -> flint.fmpq_mat:
    """Exact local matrix of a(u, v) = (grad div u, grad div v) + (u, v).

    Without ``M`` the basis is the pushed reference nodal basis; with the
    cell's DOF transform ``M`` it is the restriction of the global basis.
    """
    blk = local_blocks(el, amap)
    A = blk["graddiv"] + blk["mass"]
    return A if M is None else M.transpose() * A * M


def load_vector(amap: AffineMap, el: ElementDef, f: VectorPolynomial) -> list[Fraction]:
    """Exact b_i = integral over K of f . w_i for the pushed reference nodal basis."""
    fhat = f.compose_affine(amap.B, amap.b)
    # f . (B phi / det) * det = (B^T f) . phi on the reference cell
    BT = [[amap.B[j][i] for j in range(3)] for i in range(3)]
    g = fhat.matmul(BT)
    return [sum((g.c[c] * p.c[c]).integrate(el.cell) for c in range(3)) for p in el.nodal_polynomials()]


# -- quadrature against separable fields ------------------------------------------------------

def element_degrees(el: ElementDef) -> tuple[int, int]:
    """(total degree, largest partial degree) of the nodal basis."""
    alphas = [k[1] if el.is_vector else k for k in el.nodal.keys]
    return max(sum(a) for a in alphas), max(max(a) for a in alphas)


def field_degrees(f: SeparableField) -> tuple[int, int]:
    tot = max((sum(len(f.polys[i]) - 1 for i in t[2:]) for t in f.terms), default=0)
    part = max((len(p) - 1 for p in f.polys), default=0)
    return tot, part


def exact_degree(el: ElementDef, f: SeparableField, derivs: int = 0) -> int:
    """Quadrature degree making the product of f and a (differentiated) basis function exact."""
    et, ep = element_degrees(el)
    ft, fp = field_degrees(f)
    if el.cell == "tet":
        return ft + max(et - derivs, 0)
    return fp + ep


def physical_basis(space: GlobalSpace, grp, points: np.ndarray, quantity: str) -> np.ndarray:
    """Phi[q, c, j]: physical value/div/grad-div of global-basis function j at F_K(points)."""
    el = space.el
    B = grp.amap.B_float
    det = float(grp.amap.detB)
    if quantity == "value":
        tab = el.tabulate(points, "value") @ (B.T / det)  # (Q, n, 3)
    elif quantity == "div":
        tab = el.tabulate(points, "div")[:, :, None] / det
    elif quantity == "graddiv":
        tab = el.tabulate(points, "graddiv") @ (np.linalg.inv(B) / det)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    return np.ascontiguousarray(np.transpose(tab, (0, 2, 1)) @ grp.M_float)


def physical_tabulation(space: GlobalSpace, grp, qr: QuadratureRule, quantity: str) -> np.ndarray:
    """Quadrature-weighted physical basis including the Jacobian |det B|."""
    Phi = physical_basis(space, grp, qr.points, quantity)
    return np.ascontiguousarray(Phi * (qr.weights * float(grp.amap.detB))[:, None, None])


def cell_moments(space: GlobalSpace, f: SeparableField, quantity: str, degree: int | None = None,
                 backend: str | None = None) -> np.ndarray:
    """out[K, j] = integral over cell K of f . (quantity of global basis j) (local order)."""
    derivs = {"value": 0, "div": 1, "graddiv": 2}[quantity]
    if degree is None:
        degree = exact_degree(space.el, f, derivs)
    qr = rule(space.mesh.cell_type, degree)
    mesh = space.mesh
    comp, coef, ix, iy, iz = f.term_arrays()
    out = np.zeros((mesh.num_cells, space.el.dim))
    for grp in space.groups:
        Phi = physical_tabulation(space, grp, qr, quantity)
        if Phi.shape[1] != f.ncomp:
            raise ValueError(f"field has {f.ncomp} components, {quantity} needs {Phi.shape[1]}")
        T = f.lattice_tables(mesh.N, qr.points @ grp.amap.B_float.T)
        idx = mesh.lattice[mesh.cells[grp.cells, 0]]
        out[grp.cells] = kernels.separable_moments(idx, T, comp, coef, ix, iy, iz, Phi, backend=backend)
    return out


def scatter(space: GlobalSpace, local: np.ndarray) -> np.ndarray:
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.dim)


# -- global system ----------------------------------------------------------------------------

@dataclass
class LinearSystem:
    A: sp.csr_matrix  # free x free
    b: np.ndarray
    free: np.ndarray
    space: GlobalSpace = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.free)

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.space.dim)
        x[self.free] = x_free
        return x

    def dump(self, matrix_path, rhs_path) -> None:
        from .fespace import export_coo
        export_coo(self.A, matrix_path)
        np.savetxt(rhs_path, self.b, fmt="%.17e")


def group_local_matrices(space: GlobalSpace, parts: tuple[str, ...] = ("graddiv", "mass")) -> list[np.ndarray]:
    """Float local matrices (global-basis restriction) for each cell group, exact before rounding."""
    out = []
    for grp in space.groups:
        blk = local_blocks(space.el, grp.amap)
        A = blk[parts[0]]
        for p in parts[1:]:
            A = A + blk[p]
        out.append(ratmat.to_float(grp.M.transpose() * A * grp.M))
    return out


def assemble_matrix(space: GlobalSpace, free: np.ndarray, parts: tuple[str, ...] = ("graddiv", "mass")) -> sp.csr_matrix:
    gmap = np.full(space.dim, -1, dtype=np.int64)
    gmap[free] = np.arange(len(free))
    n = space.el.dim
    rows, cols, vals = [], [], []
    for grp, Aloc in zip(space.groups, group_local_matrices(space, parts)):
        loc = gmap[space.cell_dofs[grp.cells]]  # (nc, n)
        for i in range(n):
            ri = loc[:, i]
            keep = ri >= 0
            if not keep.any():
                continue
            ci = loc[keep]
            mask = ci >= 0
            rows.append(np.repeat(ri[keep], n)[mask.ravel()].astype(np.int32))
            cols.append(ci[mask].astype(np.int32))
            vals.append(np.broadcast_to(Aloc[i], ci.shape)[mask])
    m = len(free)
    if not rows:
        return sp.csr_matrix((m, m))
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)).tocsr()
    A.sum_duplicates()
    return A


def assemble(space: GlobalSpace, f: SeparableField, mask: np.ndarray | None = None) -> LinearSystem:
    """Reduced system on the DOFs not listed in ``mask`` (default: the W0 boundary mask)."""
    if space.kind != "W":
        raise ValueError("assembly is defined for the W space")
    if mask is None:
        free = free_dofs(space)
    else:
        keep = np.ones(space.dim, dtype=bool)
        keep[np.asarray(mask, dtype=np.int64)] = False
        free = np.flatnonzero(keep)
    if not len(free):
        raise DegenerateSystemError("every degree of freedom is constrained; refine the mesh")
    A = assemble_matrix(space, free)
    b = scatter(space, cell_moments(space, f, "value"))[free]
    return LinearSystem(A, b, free, space)


def energy_functional(space: GlobalSpace, u: SeparableField, graddiv_u: SeparableField) -> np.ndarray:
    """g[i] = a(u, w_i) for every global basis function (u given with its grad div)."""
    loc = cell_moments(space, graddiv_u, "graddiv") + cell_moments(space, u, "value")
    return scatter(space, loc)


# -- manufactured solution --------------------------------------------------------------------

_P = (Fraction(0), Fraction(0), Fraction(0), Fraction(-1), Fraction(3), Fraction(-3), Fraction(1))  # t^3 (t-1)^3


@dataclass(frozen=True)
class ManufacturedProblem:
    phi: SeparableField
    u: SeparableField
    div_u: SeparableField
    graddiv_u: SeparableField
    f: SeparableField

    @cached_property
    def u_poly(self) -> VectorPolynomial:
        return self.u.to_polynomial()

    @cached_property
    def f_poly(self) -> VectorPolynomial:
        return self.f.to_polynomial()

    @cached_property
    def phi_poly(self) -> Polynomial:
        return self.phi.to_polynomial()


def manufactured_problem() -> ManufacturedProblem:
    """u = grad(x^3 y^3 z^3 (x-1)^3 (y-1)^3 (z-1)^3) and f = (grad div)^2 u + u."""
    phi = SeparableField.product(_P, _P, _P)
    u = phi.grad()
    d = u.div()
    gd = d.grad()
    f = gd.div().grad() + u
    return ManufacturedProblem(phi, u, d, gd, f)
