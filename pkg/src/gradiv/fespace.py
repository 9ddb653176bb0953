"""Global finite element spaces on structured meshes.

Global DOFs live on mesh entities: the DOF with position ``j`` on global
entity ``e`` of dimension ``d`` has id ``offset[d] + e * n_d + j`` and is the
functional of the reference table, written in the entity's global
coordinates (sorted global vertices; face normal t1 x t2 of that order).

Per cell, the pushed-forward reference functionals ``l`` relate to the
global ones ``g`` through ``l = S T g``: ``T`` is the exact change of entity
coordinates (a signed permutation for low orders, a general block for
higher-order weights) and ``S`` is the Piola scale (det B for divergence
functionals of W, 1 otherwise).  The basis of the global space restricted
to a cell is therefore ``P(phihat) @ M`` with ``M = S T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import flint
import numpy as np
import scipy.sparse as sp

from . import ratmat
from .mesh import AffineMap, StructuredMesh
from .polyalg import Polynomial, VectorPolynomial, curl, div, grad
from .refelem import ElementDef, dual_row, element, entities, face_orientation

KINDS = ("Sigma", "V", "W", "Sigma+")
PIOLA = {"Sigma": "scalar", "Sigma+": "scalar", "V": "covariant", "W": "contravariant"}


@dataclass
class CellGroup:
    """Cells sharing geometry class and orientation pattern (hence M, B)."""

    cells: np.ndarray
    amap: AffineMap
    M: flint.fmpq_mat  # local DOF transform S T (exact)
    M_float: np.ndarray
    Minv_float: np.ndarray


def _param_coords(cell: str, dim: int, m: int) -> tuple[int, int]:
    if dim == 1:
        return (m, 0)
    return [(0, 0), (1, 0), (0, 1), (1, 1)][m]


def _transform_entity_block(el: ElementDef, dofs_idx: list[int], local_ids: list[int], dim: int,
                            e_local: int) -> list[list[Fraction]]:
    """Exact T block for one entity: local functional = sum_c T[a, c] global functional c."""
    n = len(dofs_idx)
    if dim in (0, 3):
        return [[Fraction(int(a == c)) for c in range(n)] for a in range(n)]
    order = sorted(range(len(local_ids)), key=lambda m: local_ids[m])  # order[j] = local position of j-th global vertex
    c0 = _param_coords(el.cell, dim, order[0])
    c1 = _param_coords(el.cell, dim, order[1])
    if dim == 1:
        J = [[Fraction(c1[0] - c0[0])]]
        jinv = [[1 / J[0][0]]]
        det_inv = jinv[0][0]
        A = [[J[0][0], 0, 0], [0, 0, 0], [0, 0, 0]]
        b = [c0[0], 0, 0]
    else:
        c2 = _param_coords(el.cell, dim, order[2])
        J = [[Fraction(c1[0] - c0[0]), Fraction(c2[0] - c0[0])], [Fraction(c1[1] - c0[1]), Fraction(c2[1] - c0[1])]]
        det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
        jinv = [[J[1][1] / det, -J[0][1] / det], [-J[1][0] / det, J[0][0] / det]]
        det_inv = 1 / det
        A = [[J[0][0], J[0][1], 0], [J[1][0], J[1][1], 0], [0, 0, 0]]
        b = [c0[0], c0[1], 0]
    sigma = face_orientation(el.cell, e_local) if dim == 2 else 1
    dofs = [el.dofs[i] for i in dofs_idx]
    frame_index = {"tangent": 0, "t1": 0, "t2": 1}
    T = [[Fraction(0)] * n for _ in range(n)]
    for a, fa in enumerate(dofs):
        q = _scalar_weight(fa)
        qt = q.compose_affine(A, b)
        if fa.quantity != "dot":
            contrib = {(fa.quantity, None): qt}
        elif fa.frame == "normal":
            contrib = {("dot", "normal"): qt * (sigma * det_inv)}
        else:
            ia = frame_index[fa.frame]
            contrib = {}
            for fb, ib in frame_index.items():
                if fb == "tangent" and dim != 1 or fb != "tangent" and dim == 1:
                    continue
                coef = jinv[ib][ia]
                if coef:
                    contrib[("dot", fb)] = qt * coef
        for key, poly in contrib.items():
            remaining = dict(poly.terms)
            for c, fc in enumerate(dofs):
                if (fc.quantity, fc.frame if fc.quantity == "dot" else None) != key:
                    continue
                mono = fc.mono
                if mono in remaining:
                    T[a][c] += remaining.pop(mono)
            if remaining:
                raise RuntimeError("entity weight space is not closed under reparametrization")
    return T


def _scalar_weight(f) -> Polynomial:
    if f.quantity != "dot":
        return f.weight
    return Polynomial.monomial(f.mono)


class GlobalSpace:
    """One of Sigma^r, V^r, W^{r-1,k}, Sigma^{+,k-1} on a structured mesh."""

    def __init__(self, kind: str, mesh: StructuredMesh, r: int, k: int):
        if kind not in KINDS:
            raise ValueError(f"unknown space kind {kind!r}")
        self.kind = kind
        self.mesh = mesh
        self.r = r
        self.k = k
        self.el: ElementDef = element(kind, mesh.cell_type, r, k)
        per = self.el.dofs_per_entity()
        self.n_per_entity = [per[d] for d in range(4)]
        counts = mesh.counts()
        self.offsets = np.cumsum([0] + [counts[d] * self.n_per_entity[d] for d in range(4)])
        self.dim = int(self.offsets[-1])
        self._build_cell_dofs()

    # -- numbering -----------------------------------------------------------------------
    def _build_cell_dofs(self):
        el, mesh = self.el, self.mesh
        K = mesh.num_cells
        cd = np.empty((K, el.dim), dtype=np.int64)
        for (dim, e), idx in el.entity_dofs().items():
            gid = mesh.cell_entities(dim)[:, e]
            n = self.n_per_entity[dim]
            for j, i in enumerate(idx):
                cd[:, i] = self.offsets[dim] + gid * n + j
        self.cell_dofs = cd

    @cached_property
    def dof_entity(self) -> tuple[np.ndarray, np.ndarray]:
        """(dimension, global entity id) of every global DOF."""
        dims = np.empty(self.dim, dtype=np.int64)
        ents = np.empty(self.dim, dtype=np.int64)
        for d in range(4):
            lo, hi = self.offsets[d], self.offsets[d + 1]
            n = self.n_per_entity[d]
            dims[lo:hi] = d
            if n:
                ents[lo:hi] = np.arange(hi - lo) // n
        return dims, ents

    @cached_property
    def owner(self) -> np.ndarray:
        """Lowest cell id containing each DOF's entity."""
        own = np.full(self.dim, np.iinfo(np.int64).max)
        K = self.mesh.num_cells
        np.minimum.at(own, self.cell_dofs.ravel(), np.repeat(np.arange(K), self.el.dim))
        return own

    # -- per-cell transforms -------------------------------------------------------------------
    @cached_property
    def groups(self) -> list[CellGroup]:
        out = []
        for key, cells in self.mesh.cell_groups().items():
            c = int(cells[0])
            amap = self.mesh.affine_map(c)
            M = self._cell_transform(c, amap)
            Mf = ratmat.to_float(M)
            out.append(CellGroup(cells, amap, M, Mf, np.linalg.inv(Mf)))
        return out

    @cached_property
    def cell_group_index(self) -> np.ndarray:
        idx = np.empty(self.mesh.num_cells, dtype=np.int64)
        for g, grp in enumerate(self.groups):
            idx[grp.cells] = g
        return idx

    def _cell_transform(self, cell: int, amap: AffineMap) -> flint.fmpq_mat:
        el, mesh = self.el, self.mesh
        n = el.dim
        T = [[Fraction(0)] * n for _ in range(n)]
        verts = mesh.cells[cell]
        for (dim, e), idx in el.entity_dofs().items():
            local_ids = [int(verts[v]) for v in entities(el.cell, dim)[e]] if dim in (1, 2) else []
            blk = _transform_entity_block(el, idx, local_ids, dim, e)
            for a, ia in enumerate(idx):
                for c, ic in enumerate(idx):
                    T[ia][ic] = blk[a][c]
        for a, f in enumerate(el.dofs):
            if self.kind == "W" and f.quantity == "div":
                T[a] = [v * amap.detB for v in T[a]]
        return ratmat.to_flint(T)

    def cell_transform(self, cell: int) -> flint.fmpq_mat:
        return self.groups[self.cell_group_index[cell]].M

    # -- evaluation -------------------------------------------------------------------------------
    def reference_coefficients(self, coeffs: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        """Coefficients of u_h|K in the reference nodal basis, shape (ncells, ndof)."""
        cells = np.arange(self.mesh.num_cells) if cells is None else np.asarray(cells)
        loc = np.asarray(coeffs)[self.cell_dofs[cells]]
        out = np.empty_like(loc, dtype=float)
        gi = self.cell_group_index[cells]
        for g, grp in enumerate(self.groups):
            sel = gi == g
            if np.any(sel):
                out[sel] = loc[sel] @ grp.M_float.T
        return out

    def piola_eval(self, coeffs: np.ndarray, cell: int, xhat) -> tuple:
        """(value, divergence or gradient) of u_h at F_K(xhat).

        W: (vector, div); V: (vector, curl); scalar spaces: (value, gradient).
        """
        grp = self.groups[self.cell_group_index[cell]]
        chat = grp.M_float @ np.asarray(coeffs)[self.cell_dofs[cell]]
        pts = np.atleast_2d(np.asarray(xhat, dtype=float))
        B = grp.amap.B_float
        det = float(grp.amap.detB)
        if self.kind == "W":
            v = np.einsum("pnc,n->pc", self.el.tabulate(pts, "value"), chat)
            d = self.el.tabulate(pts, "div") @ chat
            return (v @ B.T) / det, d / det
        if self.kind == "V":
            Binv = np.linalg.inv(B)
            v = np.einsum("pnc,n->pc", self.el.tabulate(pts, "value"), chat)
            cu = np.einsum("pnc,n->pc", self.el.tabulate(pts, "curl"), chat)
            return v @ Binv, (cu @ B.T) / det
        Binv = np.linalg.inv(B)
        v = self.el.tabulate(pts, "value") @ chat
        g = np.einsum("pnc,n->pc", self.el.tabulate(pts, "grad"), chat)
        return v, g @ Binv

    def evaluate_cells(self, coeffs: np.ndarray, xhat: np.ndarray, what: str = "value",
                       cells: np.ndarray | None = None) -> np.ndarray:
        """Physical values of u_h (or a derived quantity) at F_K(xhat) for many cells.

        Returns (ncells, npts) for scalar quantities and (ncells, npts, 3) for
        vector ones.  ``what`` is one of value, div, graddiv (W), curl (V), grad
        (scalar spaces).
        """
        cells = np.arange(self.mesh.num_cells) if cells is None else np.asarray(cells)
        chat = self.reference_coefficients(coeffs, cells)
        tab = self.el.tabulate(xhat, what)
        vector_out = tab.ndim == 3
        out = np.empty((len(cells), len(xhat), 3) if vector_out else (len(cells), len(xhat)))
        gi = self.cell_group_index[cells]
        for g, grp in enumerate(self.groups):
            sel = np.flatnonzero(gi == g)
            if not len(sel):
                continue
            B = grp.amap.B_float
            det = float(grp.amap.detB)
            if vector_out:
                vals = np.einsum("pnc,kn->kpc", tab, chat[sel])
                out[sel] = vals @ self._vector_push(what, B, det).T
            else:
                vals = chat[sel] @ tab.T
                out[sel] = vals / det if (self.kind == "W" and what == "div") else vals
        return out

    def _vector_push(self, what: str, B: np.ndarray, det: float) -> np.ndarray:
        """Matrix P with physical = P @ reference for a vector quantity."""
        BinvT = np.linalg.inv(B).T
        if self.kind == "W":
            return B / det if what == "value" else BinvT / det
        if self.kind == "V":
            return BinvT if what == "value" else B / det
        return BinvT

    def cell_polynomial(self, coeffs, cell: int, exact: bool = True):
        """u_h restricted to a cell as an exact polynomial in physical coordinates.

        ``coeffs`` must hold exact rationals when ``exact`` is set.
        """
        grp = self.groups[self.cell_group_index[cell]]
        loc = [Fraction(coeffs[int(g)]) for g in self.cell_dofs[cell]]
        M = ratmat.from_flint(grp.M)
        chat = [sum((M[i][j] * loc[j] for j in range(len(loc))), Fraction(0)) for i in range(len(loc))]
        polys = self.el.nodal_polynomials()
        if self.el.is_vector:
            uhat = VectorPolynomial.zero()
            for c, p in zip(chat, polys):
                if c:
                    uhat = uhat + p * c
        else:
            uhat = Polynomial()
            for c, p in zip(chat, polys):
                if c:
                    uhat = uhat + p * c
        amap = self.mesh.affine_map(cell)
        Binv = amap.inverse_B()
        bb = amap.b
        shift = [-sum(Binv[i][j] * bb[j] for j in range(3)) for i in range(3)]
        u = uhat.compose_affine(Binv, shift)
        B, det = grp.amap.B, grp.amap.detB
        if self.kind == "W":
            return u.matmul(B) / det
        if self.kind == "V":
            BinvT = [[Binv[j][i] for j in range(3)] for i in range(3)]
            return u.matmul(BinvT)
        return u

    # -- interpolation helpers -----------------------------------------------------------------------
    def pullback(self, u, amap: AffineMap):
        """Reference-cell representative of an exact polynomial field."""
        uhat = u.compose_affine(amap.B, amap.b)
        if self.kind == "W":
            Binv = amap.inverse_B()
            return uhat.matmul(Binv) * amap.detB
        if self.kind == "V":
            BT = [[amap.B[j][i] for j in range(3)] for i in range(3)]
            return uhat.matmul(BT)
        return uhat

    def local_dofs_exact(self, u, cell: int) -> list[Fraction]:
        """Global-DOF values of an exact polynomial field, in the cell's local order."""
        uhat = self.pullback(u, self.mesh.affine_map(cell))
        l = self.el.apply_dofs(uhat)
        sol = self.group_inverse(self.cell_group_index[cell]) * ratmat.to_flint([[v] for v in l], ncols=1)
        return [r[0] for r in ratmat.from_flint(sol)]

    def group_inverse(self, g: int) -> flint.fmpq_mat:
        cache = self.__dict__.setdefault("_minv", {})
        if g not in cache:
            cache[g] = self.groups[g].M.inv()
        return cache[g]


def build_space(kind: str, mesh: StructuredMesh, r: int, k: int) -> GlobalSpace:
    return GlobalSpace(kind, mesh, r, k)


def build_complex(mesh: StructuredMesh, r: int, k: int) -> tuple[GlobalSpace, ...]:
    return tuple(GlobalSpace(kind, mesh, r, k) for kind in KINDS)


def alternating_sum(spaces) -> int:
    """-1 + dim Sigma - dim V + dim W - dim Sigma+ (zero for an exact complex)."""
    s, v, w, sp_ = spaces
    return -1 + s.dim - v.dim + w.dim - sp_.dim


def boundary_mask_W0(space: GlobalSpace) -> np.ndarray:
    """Sorted ids of the W DOFs living on boundary vertices, edges and faces."""
    if space.kind != "W":
        raise ValueError("boundary mask is defined for the W space")
    dims, ents = space.dof_entity
    mask = np.zeros(space.dim, dtype=bool)
    for d in range(3):
        sel = dims == d
        mask[sel] = space.mesh.boundary_flags(d)[ents[sel]]
    return np.flatnonzero(mask)


def free_dofs(space: GlobalSpace) -> np.ndarray:
    constrained = np.zeros(space.dim, dtype=bool)
    constrained[boundary_mask_W0(space)] = True
    return np.flatnonzero(~constrained)


# -- differential operators ---------------------------------------------------------------------------

_OPS = {("grad", "Sigma", "V"), ("curl", "V", "W"), ("div", "W", "Sigma+")}


def reference_operator(op: str, src: ElementDef, dst: ElementDef) -> flint.fmpq_mat:
    """Exact matrix D[a, j] = dst dof a applied to op(src nodal function j) on the reference cell."""
    fn = {"grad": grad, "curl": curl, "div": div}[op]
    src_keys = src.nodal.keys
    dst_keys = list(dst.span.monomial_keys())
    position = {key: i for i, key in enumerate(dst_keys)}
    images = []
    for key in src_keys:
        mono = (Polynomial.monomial(key) if not src.is_vector
                else VectorPolynomial.unit(key[0], Polynomial.monomial(key[1])))
        img = fn(mono)
        items = (list(img.terms.items()) if isinstance(img, Polynomial)
                 else [((c, a), v) for c, p in enumerate(img.c) for a, v in p.terms.items()])
        for tkey, _ in items:
            if tkey not in position:
                position[tkey] = len(dst_keys)
                dst_keys.append(tkey)
        images.append(items)
    # monomials outside the target span's support cancel in the nodal combinations
    Dual = dst.dual_matrix()
    extra = dst_keys[Dual.ncols():]
    if extra:
        ext = ratmat.to_flint([dual_row(f, extra, dst.cell) for f in dst.dofs], ncols=len(extra))
        full = ratmat.to_flint([[Dual[i, j] for j in range(Dual.ncols())] + [ext[i, j] for j in range(len(extra))]
                                for i in range(Dual.nrows())], ncols=len(dst_keys))
    else:
        full = Dual
    rows = [[0] * len(src_keys) for _ in dst_keys]
    for j, items in enumerate(images):
        for tkey, v in items:
            rows[position[tkey]][j] = v
    Op = ratmat.to_flint(rows, ncols=len(src_keys))
    return full * Op * src.nodal.coeffs.transpose()


@dataclass
class ExactSparse:
    """Sparse rational matrix as a dict of rows."""

    shape: tuple[int, int]
    rows: dict[int, dict[int, Fraction]]

    def triplets(self):
        for i, row in self.rows.items():
            for j, v in row.items():
                yield i, j, v

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def __matmul__(self, other: "ExactSparse") -> "ExactSparse":
        if self.shape[1] != other.shape[0]:
            raise ValueError("shape mismatch")
        out: dict[int, dict[int, Fraction]] = {}
        for i, row in self.rows.items():
            acc: dict[int, Fraction] = {}
            for k, a in row.items():
                for j, b in other.rows.get(k, {}).items():
                    acc[j] = acc.get(j, 0) + a * b
            acc = {j: v for j, v in acc.items() if v}
            if acc:
                out[i] = acc
        return ExactSparse((self.shape[0], other.shape[1]), out)

    def is_zero(self) -> bool:
        return self.nnz == 0

    def matvec(self, x) -> list[Fraction]:
        out = [Fraction(0)] * self.shape[0]
        for i, row in self.rows.items():
            out[i] = sum((v * x[j] for j, v in row.items()), Fraction(0))
        return out

    def rank(self) -> int:
        """Rank modulo a 61-bit prime (a certified lower bound of the rational rank)."""
        return ratmat.modular_rank(self.triplets(), self.shape)

    def to_scipy(self) -> sp.csr_matrix:
        if not self.nnz:
            return sp.csr_matrix(self.shape)
        i, j, v = zip(*((i, j, float(v)) for i, j, v in self.triplets()))
        return sp.csr_matrix((v, (i, j)), shape=self.shape)


def differential_matrix(op: str, src: GlobalSpace, dst: GlobalSpace, exact: bool = False):
    """Matrix mapping source coefficients to target coefficients of op(u)."""
    if (op, src.kind, dst.kind) not in _OPS:
        raise ValueError(f"unsupported operator pair ({op}, {src.kind}, {dst.kind})")
    if src.mesh is not dst.mesh:
        raise ValueError("spaces live on different meshes")
    D = reference_operator(op, src.el, dst.el)
    rows_i, cols_j, vals = [], [], []
    exact_rows: dict[int, dict[int, Fraction]] = {}
    for g, grp_s in enumerate(src.groups):
        cells = grp_s.cells
        # target groups coincide with source groups (same mesh partition)
        grp_t = dst.groups[dst.cell_group_index[cells[0]]]
        G = grp_t.M.solve(D * grp_s.M)
        if op == "div":
            det = grp_s.amap.detB
            G = G * flint.fmpq(det.denominator, det.numerator)
        Gq = ratmat.from_flint(G)
        Gf = ratmat.to_float(G)
        td = dst.cell_dofs[cells]
        sd = src.cell_dofs[cells]
        owned = dst.owner[td] == cells[:, None]
        if exact:
            for ci in range(len(cells)):
                for a in np.flatnonzero(owned[ci]):
                    row = exact_rows.setdefault(int(td[ci, a]), {})
                    for b, v in enumerate(Gq[a]):
                        if v:
                            row[int(sd[ci, b])] = v
        else:
            nz_a, nz_b = np.nonzero(Gf)
            for a, b in zip(nz_a, nz_b):
                sel = owned[:, a]
                rows_i.append(td[sel, a])
                cols_j.append(sd[sel, b])
                vals.append(np.full(sel.sum(), Gf[a, b]))
    if exact:
        return ExactSparse((dst.dim, src.dim), exact_rows)
    if not rows_i:
        return sp.csr_matrix((dst.dim, src.dim))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows_i), np.concatenate(cols_j))),
                         shape=(dst.dim, src.dim))


def export_coo(A, path) -> None:
    """Write a sparse matrix as 'row col value' lines (0-based)."""
    A = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"% {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {v!r}\n")
