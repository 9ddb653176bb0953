from collections import Counter
from fractions import Fraction

import flint
import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from gradiv.mesh import AffineMap
from gradiv.polyalg import Polynomial, VectorPolynomial, barycentric_tet
from gradiv.refelem import (UnisolvenceError, apply_dof, build_nodal_basis, dof_set, element, element_report,
                            export_tabulation, shape_span_W, sigma_plus_span, w_dimension_formula)

CASES_TET = [(r, k) for k in (2, 3, 4, 5) for r in (k - 1, k, k + 1)]
CASES_HEX = [(r, k) for k in (2, 3) for r in (k - 1, k, k + 1)]


def sympy_rank(span) -> int:
    rows = span.coefficient_rows()
    return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in rows]).rank()


@pytest.mark.parametrize("cell,r,k,dim", [("tet", 1, 2, 8), ("hex", 1, 2, 14), ("tet", 2, 2, 16),
                                          ("tet", 4, 5, 85)])
def test_shape_span_dims(cell, r, k, dim):
    span = shape_span_W(cell, r, k)
    assert span.dim == dim
    assert sympy_rank(span) == dim


@pytest.mark.parametrize("cell,k,dim", [("tet", 2, 5), ("tet", 5, 35), ("hex", 2, 9)])
def test_sigma_plus_dims(cell, k, dim):
    assert sigma_plus_span(cell, k).dim == dim


def test_invalid_parameters():
    with pytest.raises(ValueError):
        shape_span_W("tet", 4, 2)
    with pytest.raises(ValueError):
        dof_set("W", "tet", 1, 1)
    with pytest.raises(ValueError):
        element("W", "prism", 1, 2)


@pytest.mark.parametrize("cell,r,k,counts", [
    ("tet", 1, 2, {"vertex-div-value": 4, "face-normal-moment": 4}),
    ("tet", 3, 2, {"vertex-div-value": 4, "face-normal-moment": 24, "interior-moment": 3}),
    ("hex", 2, 2, {"vertex-div-value": 8, "face-normal-moment": 24, "interior-moment": 5}),
])
def test_dof_tables(cell, r, k, counts):
    assert Counter(d.kind for d in dof_set("W", cell, r, k)) == counts


@given(st.sampled_from(CASES_TET))
def test_dof_count_identity(rk):
    r, k = rk
    assert len(dof_set("W", "tet", r, k)) == w_dimension_formula(r, k) == shape_span_W("tet", r, k).dim


def test_apply_dof_examples():
    z, one, x1 = Polynomial(), Polynomial.constant(1), Polynomial.variable(0)
    dofs = dof_set("W", "tet", 1, 2)
    for d in dofs:
        if d.kind == "vertex-div-value":
            assert apply_dof(d, VectorPolynomial([x1, z, z]), "tet") == 1
    bottom = [d for d in dofs if d.kind == "face-normal-moment" and d.entity == (2, 0)][0]  # face x3 = 0
    assert apply_dof(bottom, VectorPolynomial([z, z, one]), "tet") == Fraction(-1, 2)


def test_apply_dof_with_geometry():
    # on the cube (0, 1/2)^3 the pullback of u = (x1, 0, 0) is det B B^-1 u(F x) = (x1/8, 0, 0)
    half = Fraction(1, 2)
    amap = AffineMap(((half, 0, 0), (0, half, 0), (0, 0, half)), (0, 0, 0), Fraction(1, 8))
    z = Polynomial()
    d = dof_set("W", "hex", 1, 2)[0]
    assert apply_dof(d, VectorPolynomial([Polynomial.variable(0), z, z]), "hex", amap) == Fraction(1, 8)


@pytest.mark.parametrize("cell,r,k", [("tet", 1, 2), ("tet", 2, 3), ("hex", 1, 2), ("hex", 2, 2)])
def test_biorthogonality(cell, r, k):
    el = element("W", cell, r, k)
    polys = el.nodal_polynomials()
    table = [[apply_dof(d, p, cell) for p in polys] for d in el.dofs]
    assert table == [[int(i == j) for j in range(el.dim)] for i in range(el.dim)]
    nb = build_nodal_basis(el)
    assert np.isfinite(nb.condition) and nb.condition >= 1


def test_lagrange_nodal_basis_is_barycentric():
    el = element("Sigma", "tet", 1, 0)
    polys = el.nodal_polynomials()
    assert polys == barycentric_tet()


def test_hex_lowest_vandermonde():
    V = element("W", "hex", 1, 2).vandermonde()
    assert (V.nrows(), V.ncols()) == (14, 14) and V.rank() == 14


@pytest.mark.parametrize("cell,r,k", [("tet", r, k) for r, k in CASES_TET[:6]] + [("hex", r, k) for r, k in CASES_HEX[:3]])
def test_element_properties(cell, r, k):
    rep = element_report(cell, r, k)
    assert rep.unisolvent and rep.contains_P and rep.direct_sum and rep.div_onto
    assert rep.dim == rep.expected_dim


@pytest.mark.parametrize("cell,r,k", [("tet", 2, 2), ("hex", 1, 2)])
def test_null_trace(cell, r, k):
    """A shape function on which every DOF vanishes is zero: the Vandermonde kernel is trivial."""
    el = element("W", cell, r, k)
    V = el.vandermonde()
    sol = V.solve(flint.fmpq_mat(el.dim, 1))
    assert all(sol[i, 0] == 0 for i in range(el.dim))


def test_singular_vandermonde_raises():
    el = element("W", "tet", 1, 2)
    broken = type(el)(el.space, el.cell, el.r, el.k, el.span, el.dofs[:-1] + el.dofs[:1])
    with pytest.raises(UnisolvenceError):
        build_nodal_basis(broken)


def test_tabulation_matches_exact():
    el = element("W", "hex", 2, 3)
    rng = np.random.default_rng(1)
    pts = rng.random((7, 3))
    tab = el.tabulate(pts)
    for j, p in enumerate(el.nodal_polynomials()):
        assert np.allclose(tab[:, j, :], p.evaluate(pts), atol=1e-11)


def test_export_is_json():
    import json
    data = json.loads(export_tabulation(element("W", "tet", 1, 2)))
    assert len(data["dofs"]) == 8
