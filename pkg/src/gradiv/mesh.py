"""Structured tetrahedral and cuboid meshes of the unit cube.

Vertices sit on the lattice (i, j, k)/N with id ``i + (N+1) j + (N+1)^2 k``.
Edges and faces are sorted global vertex tuples, numbered in lexicographic
order of those tuples.  Each cell keeps its local vertex order; the first
local vertex is always the lowest corner of the lattice cube it lies in.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import permutations

import numpy as np

from .refelem import REF_EDGES, REF_FACES

# Kuhn paths: for a permutation p of the axes, v0 -> +e_p0 -> +e_p1 -> +e_p2
_PERMS = list(permutations(range(3)))


def _perm_sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def kuhn_offsets() -> list[list[tuple[int, int, int]]]:
    """Lattice offsets of the 6 tets of a unit cube, ordered so det B > 0."""
    out = []
    for p in _PERMS:
        path = [(0, 0, 0)]
        cur = [0, 0, 0]
        for axis in p:
            cur[axis] = 1
            path.append(tuple(cur))
        if _perm_sign(p) < 0:
            path[1], path[2] = path[2], path[1]
        out.append(path)
    return out


HEX_OFFSETS = [(i, j, k) for k in (0, 1) for j in (0, 1) for i in (0, 1)]


@dataclass(frozen=True)
class AffineMap:
    """x = B xhat + b with exact rational entries."""

    B: tuple  # 3x3 tuple of Fractions
    b: tuple
    detB: Fraction

    @property
    def B_float(self) -> np.ndarray:
        return np.array(self.B, dtype=float)

    @property
    def b_float(self) -> np.ndarray:
        return np.array(self.b, dtype=float)

    def __call__(self, xhat):
        return tuple(sum(self.B[i][j] * xhat[j] for j in range(3)) + self.b[i] for i in range(3))

    def inverse_B(self) -> tuple:
        from . import ratmat
        inv = ratmat.from_flint(ratmat.to_flint(self.B).inv())
        return tuple(tuple(r) for r in inv)


class StructuredMesh:
    """Unit-cube mesh with full vertex/edge/face/cell connectivity."""

    def __init__(self, cell_type: str, N: int, cells: np.ndarray, cell_class: np.ndarray):
        self.cell_type = cell_type
        self.N = N
        self.h = Fraction(1, N)
        n1 = N + 1
        ids = np.arange(n1 ** 3)
        self.lattice = np.stack([ids % n1, (ids // n1) % n1, ids // (n1 * n1)], axis=1)
        self.cells = cells
        self.cell_class = cell_class
        self._build_entities()

    # -- construction ------------------------------------------------------------
    def _build_entities(self):
        loc_edges = np.array(REF_EDGES[self.cell_type])
        loc_faces = np.array(REF_FACES[self.cell_type])
        ce = np.sort(self.cells[:, loc_edges], axis=2)  # (K, ne, 2)
        cf = np.sort(self.cells[:, loc_faces], axis=2)
        self.edges, inv_e = np.unique(ce.reshape(-1, 2), axis=0, return_inverse=True)
        self.faces, inv_f = np.unique(cf.reshape(-1, cf.shape[2]), axis=0, return_inverse=True)
        self.cell_edges = inv_e.reshape(ce.shape[:2])
        self.cell_faces = inv_f.reshape(cf.shape[:2])
        counts = np.bincount(self.cell_faces.ravel(), minlength=len(self.faces))
        self.face_cell_count = counts
        bface = counts == 1
        self.boundary_face = bface
        bverts = np.zeros(self.num_vertices, dtype=bool)
        bverts[self.faces[bface].ravel()] = True
        self.boundary_vertex = bverts
        self.boundary_edge = bverts[self.edges[:, 0]] & bverts[self.edges[:, 1]] & self._edge_on_boundary_face()
        # orientation signs: +1 if the local edge direction agrees with low -> high
        loc = self.cells[:, loc_edges]
        self.cell_edge_sign = np.where(loc[:, :, 0] < loc[:, :, 1], 1, -1)

    def _edge_on_boundary_face(self) -> np.ndarray:
        # an edge lies on the boundary iff both endpoints share a boundary coordinate plane
        la = self.lattice[self.edges[:, 0]]
        lb = self.lattice[self.edges[:, 1]]
        N = self.N
        on = np.zeros(len(self.edges), dtype=bool)
        for d in range(3):
            on |= ((la[:, d] == 0) & (lb[:, d] == 0)) | ((la[:, d] == N) & (lb[:, d] == N))
        return on

    # -- sizes -----------------------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return (self.N + 1) ** 3

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def counts(self) -> tuple[int, int, int, int]:
        return self.num_vertices, self.num_edges, self.num_faces, self.num_cells

    def euler_characteristic(self) -> int:
        V, E, F, K = self.counts()
        return V - E + F - K

    def num_entities(self, dim: int) -> int:
        return self.counts()[dim]

    def boundary_flags(self, dim: int) -> np.ndarray:
        if dim == 0:
            return self.boundary_vertex
        if dim == 1:
            return self.boundary_edge
        if dim == 2:
            return self.boundary_face
        return np.zeros(self.num_cells, dtype=bool)

    def cell_entities(self, dim: int) -> np.ndarray:
        """Global entity ids of each cell's local entities, shape (K, n_local)."""
        if dim == 0:
            return self.cells
        if dim == 1:
            return self.cell_edges
        if dim == 2:
            return self.cell_faces
        return np.arange(self.num_cells)[:, None]

    def entity_vertices(self, dim: int) -> np.ndarray:
        if dim == 0:
            return np.arange(self.num_vertices)[:, None]
        if dim == 1:
            return self.edges
        if dim == 2:
            return self.faces
        return np.sort(self.cells, axis=1)

    # -- geometry ------------------------------------------------------------------------
    def vertex_coords(self, v: int) -> tuple[Fraction, Fraction, Fraction]:
        return tuple(Fraction(int(c), self.N) for c in self.lattice[v])

    @cached_property
    def coords(self) -> np.ndarray:
        return self.lattice / self.N

    def affine_map(self, cell: int) -> AffineMap:
        if not 0 <= cell < self.num_cells:
            raise IndexError(f"cell id {cell} out of range")
        vs = self.cells[cell]
        p0 = self.vertex_coords(vs[0])
        cols = (1, 2, 3) if self.cell_type == "tet" else (1, 2, 4)
        dirs = [[c - o for c, o in zip(self.vertex_coords(vs[j]), p0)] for j in cols]
        B = tuple(tuple(dirs[j][i] for j in range(3)) for i in range(3))
        det = (B[0][0] * (B[1][1] * B[2][2] - B[1][2] * B[2][1])
               - B[0][1] * (B[1][0] * B[2][2] - B[1][2] * B[2][0])
               + B[0][2] * (B[1][0] * B[2][1] - B[1][1] * B[2][0]))
        return AffineMap(B, p0, det)

    def cell_vertex_order(self) -> np.ndarray:
        """argsort of each cell's global vertex ids (determines all entity orientations)."""
        return np.argsort(self.cells, axis=1, kind="stable")

    def cell_groups(self) -> dict[tuple, np.ndarray]:
        """Cells grouped by (congruence class, vertex-order pattern)."""
        key = np.concatenate([self.cell_class[:, None], self.cell_vertex_order()], axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        return {tuple(int(x) for x in uniq[g]): np.flatnonzero(inv == g) for g in range(len(uniq))}

    def cell_origins(self) -> np.ndarray:
        return self.coords[self.cells[:, 0]]

    def edge_tangent(self, e: int) -> np.ndarray:
        a, b = self.edges[e]
        return self.coords[b] - self.coords[a]

    def face_normal(self, f: int) -> np.ndarray:
        """Unnormalized t1 x t2 from the face's sorted vertex list."""
        vs = self.faces[f]
        p0 = self.coords[vs[0]]
        return np.cross(self.coords[vs[1]] - p0, self.coords[vs[2]] - p0)

    def face_cells(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_faces)]
        for c, fs in enumerate(self.cell_faces):
            for f in fs:
                out[f].append(c)
        return out

    # -- output -------------------------------------------------------------------------------
    def dump(self) -> str:
        lines = [f"MESH {self.cell_type} N={self.N}", f"VERTICES {self.num_vertices}"]
        for v, (i, j, k) in enumerate(self.lattice):
            lines.append(f"{v} {Fraction(int(i), self.N)} {Fraction(int(j), self.N)} {Fraction(int(k), self.N)}")
        lines.append(f"EDGES {self.num_edges}")
        lines += [f"{e} {a} {b} {int(self.boundary_edge[e])}" for e, (a, b) in enumerate(self.edges)]
        lines.append(f"FACES {self.num_faces}")
        lines += [f"{f} " + " ".join(str(int(v)) for v in vs) + f" {int(self.boundary_face[f])}"
                  for f, vs in enumerate(self.faces)]
        lines.append(f"CELLS {self.num_cells}")
        lines += [f"{c} " + " ".join(str(int(v)) for v in vs) for c, vs in enumerate(self.cells)]
        return "\n".join(lines) + "\n"


def _check_N(N: int):
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError("N must be a positive integer")


def _cube_corners(N: int) -> np.ndarray:
    n1 = N + 1
    i, j, k = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    i, j, k = i.transpose(2, 1, 0).ravel(), j.transpose(2, 1, 0).ravel(), k.transpose(2, 1, 0).ravel()
    return i + n1 * j + n1 * n1 * k


def _offset_ids(N: int, offs) -> np.ndarray:
    n1 = N + 1
    return np.array([a + n1 * b + n1 * n1 * c for a, b, c in offs])


def build_hex_mesh(N: int) -> StructuredMesh:
    _check_N(N)
    base = _cube_corners(N)
    cells = base[:, None] + _offset_ids(N, HEX_OFFSETS)[None, :]
    return StructuredMesh("hex", N, cells, np.zeros(len(cells), dtype=int))


def build_tet_mesh(N: int) -> StructuredMesh:
    _check_N(N)
    base = _cube_corners(N)
    offs = kuhn_offsets()
    cells = np.concatenate([base[:, None, None] + _offset_ids(N, o)[None, None, :] for o in offs], axis=1)
    cells = cells.reshape(-1, 4)
    cls = np.tile(np.arange(6), len(base))
    return StructuredMesh("tet", N, cells, cls)


def build_mesh(cell_type: str, N: int) -> StructuredMesh:
    if cell_type == "tet":
        return build_tet_mesh(N)
    if cell_type == "hex":
        return build_hex_mesh(N)
    raise ValueError("cell type must be 'tet' or 'hex'")


def affine_map(mesh: StructuredMesh, cell: int) -> AffineMap:
    return mesh.affine_map(cell)
