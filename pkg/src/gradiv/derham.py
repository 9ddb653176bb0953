"""Canonical interpolation into the four spaces and commuting-diagram checks."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .fespace import GlobalSpace, alternating_sum, build_complex, build_space, differential_matrix
from .fields import SeparableField
from .mesh import StructuredMesh, build_mesh
from .polyalg import Polynomial, VectorPolynomial, curl, div, grad, monomial_list
from .refelem import quadrature_functionals

Evaluator = Callable[[np.ndarray], np.ndarray]

# meshes up to this many cells use exact rational interpolation of polynomial fields by default
EXACT_CELL_LIMIT = 400


@dataclass(frozen=True)
class AnalyticField:
    """Pointwise evaluators for a field and the derived quantities interpolation needs."""

    kind: str  # "scalar" or "vector"
    value: Evaluator
    grad: Evaluator | None = None
    curl: Evaluator | None = None
    div: Evaluator | None = None
    poly: Polynomial | VectorPolynomial | None = None
    degree: int | None = None

    @classmethod
    def from_polynomial(cls, p: Polynomial | VectorPolynomial) -> "AnalyticField":
        if isinstance(p, Polynomial):
            g = grad(p)
            return cls("scalar", p.evaluate, grad=g.evaluate, poly=p, degree=max(p.degree, 0))
        c, d = curl(p), div(p)
        return cls("vector", p.evaluate, curl=c.evaluate, div=d.evaluate, poly=p, degree=max(p.degree, 0))

    @classmethod
    def from_separable(cls, f: SeparableField, with_polynomial: bool = False) -> "AnalyticField":
        poly = f.to_polynomial() if with_polynomial else None
        deg = max((sum(len(f.polys[i]) - 1 for i in t[2:]) for t in f.terms), default=0)
        if f.ncomp == 1:
            return cls("scalar", f.evaluate, grad=f.grad().evaluate, poly=poly, degree=deg)
        return cls("vector", f.evaluate, curl=f.curl().evaluate, div=f.div().evaluate, poly=poly, degree=deg)

    def derived(self, op: str) -> "AnalyticField":
        """The field grad u, curl u or div u as a new AnalyticField."""
        if self.poly is not None:
            return AnalyticField.from_polynomial({"grad": grad, "curl": curl, "div": div}[op](self.poly))
        fn = getattr(self, op)
        if fn is None:
            raise ValueError(f"field has no {op} evaluator")
        return AnalyticField("scalar" if op == "div" else "vector", fn,
                             degree=None if self.degree is None else max(self.degree - 1, 0))


def _space_field_check(space: GlobalSpace, field: AnalyticField):
    want = "vector" if space.kind in ("V", "W") else "scalar"
    if field.kind != want:
        raise ValueError(f"{space.kind} interpolates {want} fields, got a {field.kind} field")


def interpolate(space: GlobalSpace, field: AnalyticField, exact: bool | None = None,
                degree: int | None = None, rational: bool = False):
    """Global DOF vector of the canonical interpolant.

    Polynomial fields on small meshes go through exact rational arithmetic;
    otherwise entity integrals use Gauss rules of ``degree`` (default: exact
    for polynomial fields of known degree, else 2k+4).
    """
    _space_field_check(space, field)
    if exact is None:
        exact = field.poly is not None and space.mesh.num_cells <= EXACT_CELL_LIMIT
    if exact:
        if field.poly is None:
            raise ValueError("exact interpolation needs the polynomial form of the field")
        vals = _interpolate_exact(space, field.poly)
        return vals if rational else np.array([float(v) for v in vals])
    if degree is None:
        wdeg = max(space.r, space.k) + 1
        degree = field.degree + wdeg if field.degree is not None else 2 * space.k + 4
    return _interpolate_quadrature(space, field, degree)


def _owned_mask(space: GlobalSpace) -> np.ndarray:
    """mask[c, i]: cell c provides the global value of its local DOF i."""
    return space.owner[space.cell_dofs] == np.arange(space.mesh.num_cells)[:, None]


def _owned(space: GlobalSpace) -> dict[int, np.ndarray]:
    """Cell -> local DOF positions whose global value this cell provides."""
    mine = _owned_mask(space)
    return {int(c): np.flatnonzero(mine[c]) for c in np.flatnonzero(mine.any(axis=1))}


def _interpolate_exact(space: GlobalSpace, poly) -> list[Fraction]:
    out: list[Fraction] = [Fraction(0)] * space.dim
    for c, locs in _owned(space).items():
        vals = space.local_dofs_exact(poly, c)
        for i in locs:
            out[int(space.cell_dofs[c, i])] = vals[i]
    return out


def _interpolate_quadrature(space: GlobalSpace, field: AnalyticField, degree: int,
                            chunk: int = 2048) -> np.ndarray:
    el = space.el
    funcs = quadrature_functionals(space.kind, el.cell, el.r, el.k, degree)
    pts = np.concatenate([f[1] for f in funcs])
    sizes = [len(f[1]) for f in funcs]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    need_div = any(f[0] == "div" for f in funcs)
    if need_div and field.div is None:
        raise ValueError("W interpolation needs the divergence of the field")
    mine = _owned_mask(space)
    result = np.zeros(space.dim)
    cells_all = np.flatnonzero(mine.any(axis=1))
    gi = space.cell_group_index[cells_all]
    mesh = space.mesh
    for g, grp in enumerate(space.groups):
        cells_g = cells_all[gi == g]
        if not len(cells_g):
            continue
        B = grp.amap.B_float
        det = float(grp.amap.detB)
        Binv = np.linalg.inv(B)
        mapped = pts @ B.T
        for s in range(0, len(cells_g), chunk):
            cells = cells_g[s:s + chunk]
            X = mesh.coords[mesh.cells[cells, 0]][:, None, :] + mapped[None]
            flat = X.reshape(-1, 3)
            val = field.value(flat)
            if space.kind == "W":
                uhat = (val @ Binv.T) * det
                dhat = field.div(flat) * det
            elif space.kind == "V":
                uhat = val @ B
                dhat = None
            else:
                uhat, dhat = val, None
            uhat = uhat.reshape(len(cells), len(pts), *uhat.shape[1:])
            if dhat is not None:
                dhat = dhat.reshape(len(cells), len(pts))
            l = np.empty((len(cells), len(funcs)))
            for a, (quantity, _, w) in enumerate(funcs):
                sl = slice(starts[a], starts[a + 1])
                if quantity == "div":
                    l[:, a] = dhat[:, sl] @ w
                elif quantity == "dot":
                    l[:, a] = np.einsum("kpc,pc->k", uhat[:, sl], w)
                else:
                    l[:, a] = uhat[:, sl] @ w
            gvals = l @ grp.Minv_float.T
            sel = mine[cells]
            result[space.cell_dofs[cells][sel]] = gvals[sel]
    return result


# -- exactness ladder ---------------------------------------------------------------------------

@dataclass
class ComplexReport:
    dims: tuple[int, int, int, int]
    alternating_sum: int
    curl_grad: float
    div_curl: float
    rank_grad: int
    rank_curl: int
    rank_div: int

    @property
    def ker_curl(self) -> int:
        return self.dims[1] - self.rank_curl

    @property
    def exact(self) -> bool:
        s, v, w, p = self.dims
        return (self.alternating_sum == 0 and self.rank_grad == s - 1 and self.ker_curl == self.rank_grad
                and self.rank_div == p and w - self.rank_div == self.rank_curl)

    def passed(self, tol: float = 1e-12) -> bool:
        return self.exact and self.curl_grad <= tol and self.div_curl <= tol


def complex_report(mesh: StructuredMesh, r: int, k: int) -> ComplexReport:
    """Dimensions, composition norms and modular ranks of the global operators."""
    S, V, W, Sp = build_complex(mesh, r, k)
    G = differential_matrix("grad", S, V, exact=True)
    C = differential_matrix("curl", V, W, exact=True)
    D = differential_matrix("div", W, Sp, exact=True)
    Gf, Cf, Df = G.to_scipy(), C.to_scipy(), D.to_scipy()
    cg = abs(Cf @ Gf).max() if (Cf @ Gf).nnz else 0.0
    dc = abs(Df @ Cf).max() if (Df @ Cf).nnz else 0.0
    return ComplexReport((S.dim, V.dim, W.dim, Sp.dim), alternating_sum((S, V, W, Sp)), float(cg), float(dc),
                         G.rank(), C.rank(), D.rank())


# -- random polynomial fields ---------------------------------------------------------------------

def random_polynomial(degree: int, rng: np.random.Generator, terms: int = 8) -> Polynomial:
    """Sparse polynomial of total degree <= degree with small integer coefficients."""
    monos = monomial_list("P", degree)
    pick = rng.choice(len(monos), size=min(terms, len(monos)), replace=False)
    coefs = rng.integers(-5, 6, size=len(pick))
    coefs[coefs == 0] = 1
    return Polynomial({monos[i]: Fraction(int(c)) for i, c in zip(pick, coefs)})


def random_fields(seed: int, degree: int = 6) -> tuple[AnalyticField, AnalyticField]:
    """Seeded (scalar, vector) polynomial fields for commuting checks."""
    rng = np.random.default_rng(seed)
    scalar = random_polynomial(degree, rng)
    vector = VectorPolynomial([random_polynomial(degree, rng) for _ in range(3)])
    return AnalyticField.from_polynomial(scalar), AnalyticField.from_polynomial(vector)


# -- commuting diagram ---------------------------------------------------------------------------

def random_reference_points(cell: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if cell == "hex":
        return rng.random((n, 3))
    # uniform on the reference tet: sorted uniforms give barycentric gaps
    u = np.sort(rng.random((n, 3)), axis=1)
    lam = np.diff(np.concatenate([np.zeros((n, 1)), u, np.ones((n, 1))], axis=1), axis=1)
    return lam[:, 1:]


def commuting_check(mesh: StructuredMesh, r: int, k: int, scalar: AnalyticField, vector: AnalyticField,
                    npts: int = 20, seed: int = 0, exact: bool | None = None) -> dict[str, float]:
    """Max residuals of grad pi = r grad, curl r = i curl, div i = pi~ div at random points.

    In exact mode (polynomial fields on small meshes) both sides are formed as
    exact DOF vectors, the discrete residual function d(pi u) - pi'(d u) is
    built from their exact difference and then sampled; otherwise both sides
    are sampled in floating point and subtracted.
    """
    if exact is None:
        exact = (scalar.poly is not None and vector.poly is not None
                 and mesh.num_cells <= EXACT_CELL_LIMIT)
    S, V, W, Sp = build_complex(mesh, r, k)
    xhat = random_reference_points(mesh.cell_type, npts, np.random.default_rng(seed))
    pairs = [("grad", S, V, scalar), ("curl", V, W, vector), ("div", W, Sp, vector)]
    out = {}
    for op, src, dst, fld in pairs:
        lhs = interpolate(src, fld, exact, rational=exact)
        rhs = interpolate(dst, fld.derived(op), exact, rational=exact)
        if exact:
            D = differential_matrix(op, src, dst, exact=True)
            diff = np.array([float(a - b) for a, b in zip(D.matvec(lhs), rhs)])
            res = dst.evaluate_cells(diff, xhat)
        else:
            what = {"grad": "grad", "curl": "curl", "div": "div"}[op]
            res = src.evaluate_cells(lhs, xhat, what) - dst.evaluate_cells(rhs, xhat)
        out[op] = float(np.abs(res).max())
    return out


def interpolation_convergence(family: int, k: int, cell: str, Ns: Sequence[int], field: SeparableField):
    """Interpolation errors of i_h over a mesh sequence as a RateTable."""
    from .analysis import RateTable, error_norms

    r = k + family
    reports = []
    af = AnalyticField.from_separable(field)
    for N in Ns:
        W = build_space("W", build_mesh(cell, N), r, k)
        reports.append(error_norms(W, interpolate(W, af, exact=False), field))
    return RateTable.from_reports(reports)
