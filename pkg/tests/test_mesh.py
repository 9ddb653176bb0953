from fractions import Fraction

import numpy as np
import pytest

from gradiv.mesh import affine_map, build_hex_mesh, build_mesh, build_tet_mesh


def test_hex_counts():
    m = build_hex_mesh(1)
    assert m.counts() == (8, 12, 6, 1) and m.euler_characteristic() == 1
    m = build_hex_mesh(2)
    assert m.counts() == (27, 54, 36, 8) and m.euler_characteristic() == 1
    assert build_hex_mesh(3).h == Fraction(1, 3)


def test_tet_counts():
    m = build_tet_mesh(1)
    assert m.counts() == (8, 19, 18, 6) and m.euler_characteristic() == 1
    assert build_tet_mesh(2).num_cells == 48


@pytest.mark.parametrize("cell", ["tet", "hex"])
@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_euler(cell, N):
    m = build_mesh(cell, N)
    V, E, F, K = m.counts()
    assert V - E + F - K == 1


@pytest.mark.parametrize("N", [1, 2, 3])
def test_tet_volumes(N):
    m = build_tet_mesh(N)
    for c in range(m.num_cells):
        assert abs(affine_map(m, c).detB) == Fraction(1, N ** 3)  # 6 * volume


def test_affine_examples():
    m = build_hex_mesh(1)
    a = affine_map(m, 0)
    assert a.B == tuple(tuple(Fraction(int(i == j)) for j in range(3)) for i in range(3))
    assert tuple(a.b) == (0, 0, 0)
    a = affine_map(build_hex_mesh(2), 0)
    assert a.detB == Fraction(1, 8)
    t = build_tet_mesh(1)
    assert all(abs(affine_map(t, c).detB) == 1 for c in range(6))


def _outward(m, c, f):
    """Outward normal of global face f seen from cell c (centroid test)."""
    n = m.face_normal(f)
    centroid = m.coords[m.cells[c]].mean(axis=0)
    fc = m.coords[m.faces[f]].mean(axis=0)
    return n if n @ (fc - centroid) > 0 else -n


@pytest.mark.parametrize("cell", ["tet", "hex"])
def test_face_incidence(cell):
    m = build_mesh(cell, 2)
    fc = m.face_cells()
    for f, cs in enumerate(fc):
        assert len(cs) == (1 if m.boundary_face[f] else 2)
        if len(cs) == 2:
            assert np.allclose(_outward(m, cs[0], f), -_outward(m, cs[1], f))


@pytest.mark.parametrize("cell", ["tet", "hex"])
def test_orientation_reproducible(cell):
    a, b = build_mesh(cell, 3), build_mesh(cell, 3)
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.faces, b.faces)
    assert all(np.array_equal(a.face_normal(f), b.face_normal(f)) for f in range(a.num_faces))
    assert a.dump() == b.dump()


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_mesh("prism", 2)
    with pytest.raises(ValueError):
        build_mesh("tet", 0)
    with pytest.raises(IndexError):
        build_tet_mesh(1).affine_map(6)
