"""Error norms, discrete superconvergence norms and convergence-rate tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .assembly import element_degrees, field_degrees, physical_basis
from .fespace import GlobalSpace
from .fields import SeparableField
from .polyalg import VectorPolynomial, div, grad
from .quadrature import gauss_legendre, gauss_lobatto, rule

NORM_LABELS = {
    "e": "||e||",
    "V_e": "|||e|||_V",
    "div_e": "||div e||",
    "U_div_e": "|||div e|||_U",
    "graddiv_e": "||grad div e||",
    "W_graddiv_e": "|||grad div e|||_W",
}
TET_NORMS = ("e", "div_e", "graddiv_e")
HEX_NORMS = ("e", "V_e", "div_e", "U_div_e", "graddiv_e", "W_graddiv_e")


@dataclass
class ErrorReport:
    cell: str
    r: int
    k: int
    N: int
    values: dict[str, float] = field(default_factory=dict)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def family(self) -> int:
        return self.r - self.k


def _derived(exact: SeparableField) -> dict[str, SeparableField]:
    d = exact.div()
    return {"value": exact, "div": d, "graddiv": d.grad()}


def weighted_sqerr(space: GlobalSpace, coeffs: np.ndarray, f: SeparableField, quantity: str,
                   points: np.ndarray, omega: np.ndarray, backend: str | None = None) -> float:
    """sum over cells and points of omega[q, c] (f_c - (u_h quantity)_c)^2 at F_K(points).

    ``omega`` is multiplied by det B of each cell group, so reference-cell
    quadrature weights give physical integrals.
    """
    mesh = space.mesh
    comp, coef, ix, iy, iz = f.term_arrays()
    total = 0.0
    for grp in space.groups:
        Phi = physical_basis(space, grp, points, quantity)
        if Phi.shape[1] != f.ncomp:
            raise ValueError("component mismatch between field and quantity")
        T = f.lattice_tables(mesh.N, points @ grp.amap.B_float.T)
        idx = mesh.lattice[mesh.cells[grp.cells, 0]]
        loc = np.asarray(coeffs, dtype=float)[space.cell_dofs[grp.cells]]
        w = np.ascontiguousarray(omega * float(grp.amap.detB))
        total += float(kernels.separable_sqerr(idx, T, comp, coef, ix, iy, iz, Phi, loc, w, backend=backend).sum())
    return total


def _norm_degree(space: GlobalSpace, f: SeparableField, derivs: int) -> int:
    et, ep = element_degrees(space.el)
    ft, fp = field_degrees(f)
    if space.mesh.cell_type == "tet":
        return 2 * max(ft, et - derivs)
    return 2 * max(fp, ep)


def error_norms(space: GlobalSpace, coeffs: np.ndarray, exact: SeparableField,
                backend: str | None = None) -> ErrorReport:
    """||e||, ||div e|| and |div e|_1 of e = exact - u_h, with quadrature exact for e^2."""
    rep = ErrorReport(space.mesh.cell_type, space.r, space.k, space.mesh.N)
    names = {"value": "e", "div": "div_e", "graddiv": "graddiv_e"}
    for (quantity, f), derivs in zip(_derived(exact).items(), (0, 1, 2)):
        qr = rule(space.mesh.cell_type, _norm_degree(space, f, derivs))
        omega = np.repeat(qr.weights[:, None], f.ncomp, axis=1)
        rep.values[names[quantity]] = math.sqrt(max(weighted_sqerr(space, coeffs, f, quantity, qr.points,
                                                                   omega, backend), 0.0))
    if space.mesh.cell_type == "hex":
        rep.values.update(discrete_norms(space, coeffs, exact, backend))
    return rep


def exact_error_norms(space: GlobalSpace, coeffs: Sequence, exact: VectorPolynomial) -> ErrorReport:
    """||e||, ||div e|| and |div e|_1 in rational arithmetic for rational ``coeffs``.

    Each cell's error is formed as a polynomial, pulled back to the reference
    cell and integrated exactly; meant for small meshes.
    """
    mesh = space.mesh
    sq = {"e": 0, "div_e": 0, "graddiv_e": 0}
    for c in range(mesh.num_cells):
        e = exact - space.cell_polynomial(coeffs, c)
        d = div(e)
        amap = mesh.affine_map(c)
        for name, q in (("e", e), ("div_e", d), ("graddiv_e", grad(d))):
            comps = q.c if isinstance(q, VectorPolynomial) else (q,)
            pulled = [p.compose_affine(amap.B, amap.b) for p in comps]
            sq[name] += abs(amap.detB) * sum(p * p for p in pulled).integrate(mesh.cell_type)
    return ErrorReport(mesh.cell_type, space.r, space.k, mesh.N, {n: math.sqrt(v) for n, v in sq.items()})


def _line_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(n)
    return (x + 1) / 2, w / 2


def discrete_norms(space: GlobalSpace, coeffs: np.ndarray, exact: SeparableField,
                   backend: str | None = None, line_scale: int = 1) -> dict[str, float]:
    """|||e|||_V, |||div e|||_U and |||grad div e|||_W on a cuboid mesh.

    With half edge lengths h and reference coordinates xhat = (1 + xi)/2:
    U samples div e at the k-point Gauss-Lobatto tensor grid with weight
    w_r w_s w_t h^3; V integrates e_i along lines through (k+r-2)-point Gauss
    points in the transverse directions (weight w_m w_n h^2 times the line
    L2 norm); W integrates (grad div e)_i over planes at the (k-1) Gauss
    stations in direction i (weight w_n h times the plane L2 norm).
    ``line_scale`` multiplies the number of Gauss points on lines and planes.
    """
    if space.mesh.cell_type != "hex":
        raise ValueError("discrete norms are defined on cuboid meshes")
    r, k = space.r, space.k
    h = 0.5 / space.mesh.N
    vol = (2 * h) ** 3  # det B, folded in by weighted_sqerr
    der = _derived(exact)
    et, ep = element_degrees(space.el)
    nline = (max(field_degrees(exact)[1], ep) + 1) * line_scale  # exact for the squared error

    # U: LGL tensor points
    xl, wl = gauss_lobatto(k)
    P = np.array([[(1 + a) / 2, (1 + b) / 2, (1 + c) / 2] for c in xl for b in xl for a in xl])
    W3 = np.array([wa * wb * wc for wc in wl for wb in wl for wa in wl]) * h ** 3
    U = weighted_sqerr(space, coeffs, der["div"], "div", P, (W3 / vol)[:, None], backend)

    # V: lines in direction i through transverse Gauss points
    xg, wg = gauss_legendre(k + r - 2)
    xs, ws = _line_rule(nline)
    pts, om = [], []
    for i in range(3):
        a, b = [d for d in range(3) if d != i]
        for m in range(len(xg)):
            for n in range(len(xg)):
                for q in range(len(xs)):
                    x = [0.0, 0.0, 0.0]
                    x[i] = xs[q]
                    x[a] = (1 + xg[m]) / 2
                    x[b] = (1 + xg[n]) / 2
                    o = [0.0, 0.0, 0.0]
                    o[i] = wg[m] * wg[n] * h * h * (2 * h) * ws[q]
                    pts.append(x)
                    om.append(o)
    V = weighted_sqerr(space, coeffs, der["value"], "value", np.array(pts), np.array(om) / vol, backend)

    # W: planes normal to direction i at Gauss stations
    xw, ww = gauss_legendre(k - 1)
    pts, om = [], []
    for i in range(3):
        a, b = [d for d in range(3) if d != i]
        for n in range(len(xw)):
            for qa in range(len(xs)):
                for qb in range(len(xs)):
                    x = [0.0, 0.0, 0.0]
                    x[i] = (1 + xw[n]) / 2
                    x[a] = xs[qa]
                    x[b] = xs[qb]
                    o = [0.0, 0.0, 0.0]
                    o[i] = ww[n] * h * (2 * h) ** 2 * ws[qa] * ws[qb]
                    pts.append(x)
                    om.append(o)
    Wn = weighted_sqerr(space, coeffs, der["graddiv"], "graddiv", np.array(pts), np.array(om) / vol, backend)
    return {"V_e": math.sqrt(max(V, 0.0)), "U_div_e": math.sqrt(max(U, 0.0)), "W_graddiv_e": math.sqrt(max(Wn, 0.0))}


# -- rates --------------------------------------------------------------------------------------

def rates(values: Sequence[float], hs: Sequence[float]) -> list[float | None]:
    """Observed orders log(v_i / v_{i+1}) / log(h_i / h_{i+1}); the first entry is None."""
    if len(values) != len(hs):
        raise ValueError("values and mesh sizes differ in length")
    if len(hs) < 2:
        raise ValueError("rates need at least two meshes")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be strictly decreasing")
    out: list[float | None] = [None]
    for (v0, h0), (v1, h1) in zip(zip(values, hs), zip(values[1:], hs[1:])):
        out.append(math.log(v0 / v1) / math.log(h0 / h1) if v0 > 0 and v1 > 0 else float("nan"))
    return out


@dataclass
class RateTable:
    Ns: list[int]
    norms: list[str]
    values: dict[str, list[float]]
    rates: dict[str, list[float | None]]
    title: str = ""

    @property
    def hs(self) -> list[float]:
        return [1.0 / N for N in self.Ns]

    @classmethod
    def from_reports(cls, reports: Sequence[ErrorReport], title: str = "") -> "RateTable":
        if not reports:
            raise ValueError("no reports")
        norms = [n for n in NORM_LABELS if n in reports[0].values]
        Ns = [rep.N for rep in reports]
        values = {n: [rep.values[n] for rep in reports] for n in norms}
        hs = [1.0 / N for N in Ns]
        rt = {n: (rates(values[n], hs) if len(Ns) > 1 else [None]) for n in norms}
        return cls(Ns, norms, values, rt, title)

    def final_rate(self, norm: str) -> float:
        return self.rates[norm][-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "h", "norm", "value", "rate"])
        for i, N in enumerate(self.Ns):
            for n in self.norms:
                rate = self.rates[n][i]
                w.writerow([N, f"{1.0 / N:.10g}", n, f"{self.values[n][i]:.6e}", "" if rate is None else f"{rate:.4f}"])
        return buf.getvalue()

    def to_markdown(self) -> str:
        head = ["N"]
        for n in self.norms:
            head += [NORM_LABELS[n], "rate"]
        lines = ([f"**{self.title}**", ""] if self.title else []) + [
            "| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for i, N in enumerate(self.Ns):
            row = [str(N)]
            for n in self.norms:
                rate = self.rates[n][i]
                row += [f"{self.values[n][i]:.6e}", "" if rate is None else f"{rate:.4f}"]
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"

    def to_dat(self) -> str:
        """Whitespace table for log-log plotting: h followed by one column per norm."""
        lines = ["# h " + " ".join(self.norms)]
        for i, N in enumerate(self.Ns):
            lines.append(f"{1.0 / N:.10e} " + " ".join(f"{self.values[n][i]:.10e}" for n in self.norms))
        return "\n".join(lines) + "\n"
