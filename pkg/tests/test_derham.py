import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradiv.assembly import manufactured_problem
from gradiv.derham import (AnalyticField, commuting_check, interpolate, interpolation_convergence, random_fields,
                           random_polynomial)
from gradiv.fespace import build_space
from gradiv.mesh import build_mesh
from gradiv.polyalg import Polynomial, VectorPolynomial, grad


def _vector(p0, p1, p2):
    return AnalyticField.from_polynomial(VectorPolynomial([p0, p1, p2]))


@pytest.mark.parametrize("cell", ["tet", "hex"])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_reproduces_P_r_minus_1(cell, r):
    m = build_mesh(cell, 2)
    W = build_space("W", m, r, 2)
    rng = np.random.default_rng(r)
    p = VectorPolynomial([random_polynomial(r - 1, rng, terms=4) for _ in range(3)])
    c = interpolate(W, AnalyticField.from_polynomial(p))
    x = rng.random((5, 3)) if cell == "hex" else rng.dirichlet(np.ones(4), 5)[:, 1:]
    vals = W.evaluate_cells(c, x)
    for cell_id in range(m.num_cells):
        B = np.array(m.affine_map(cell_id).B, dtype=float)
        b = np.array(m.affine_map(cell_id).b, dtype=float)
        assert np.allclose(vals[cell_id], p.evaluate(x @ B.T + b), atol=1e-12)


def test_lagrange_reproduction():
    m = build_mesh("tet", 2)
    S = build_space("Sigma", m, 2, 2)
    p = random_polynomial(2, np.random.default_rng(0))
    c = interpolate(S, AnalyticField.from_polynomial(p))
    x = np.array([[0.2, 0.1, 0.3], [0.05, 0.6, 0.1]])
    for cell_id in range(m.num_cells):
        a = m.affine_map(cell_id)
        X = x @ np.array(a.B, dtype=float).T + np.array(a.b, dtype=float)
        assert np.allclose(S.evaluate_cells(c, x, cells=[cell_id])[0], p.evaluate(X), atol=1e-12)


def test_scalar_P_r_commutes_trivially():
    p = random_polynomial(2, np.random.default_rng(5))
    s = AnalyticField.from_polynomial(p)
    v = AnalyticField.from_polynomial(grad(p))
    res = commuting_check(build_mesh("tet", 1), 2, 2, s, v)
    assert max(res.values()) == 0


def test_commuting_example_tet():
    x1, x2, x3 = (Polynomial.variable(i) for i in range(3))
    v = _vector(x1 * x1 * x2, x2 * x3, x3 * x3)
    s = AnalyticField.from_polynomial(x1 * x2)
    res = commuting_check(build_mesh("tet", 1), 2, 2, s, v)
    assert max(res.values()) <= 1e-10
    res_float = commuting_check(build_mesh("tet", 1), 2, 2, s, v, exact=False)
    assert max(res_float.values()) <= 1e-10


def test_commuting_gradient_hex():
    phi = random_polynomial(5, np.random.default_rng(9))
    res = commuting_check(build_mesh("hex", 1), 1, 2, AnalyticField.from_polynomial(phi),
                          AnalyticField.from_polynomial(grad(phi)))
    assert res["div"] <= 1e-10


@settings(max_examples=6)
@given(st.integers(0, 10 ** 6), st.sampled_from(["tet", "hex"]), st.sampled_from([(1, 2), (2, 2), (3, 2)]))
def test_commuting_property(seed, cell, rk):
    res = commuting_check(build_mesh(cell, 1), *rk, *random_fields(seed, 4))
    assert max(res.values()) <= 1e-10


@pytest.mark.parametrize("cell,r,k", [("tet", 2, 2), ("hex", 1, 2), ("tet", 3, 3)])
def test_interpolation_is_projection(cell, r, k):
    m = build_mesh(cell, 2)
    W = build_space("W", m, r, k)
    _, v = random_fields(3, 4)
    c = interpolate(W, v, rational=True)
    for cell_id in (0, m.num_cells - 1):
        u_h = W.cell_polynomial(c, cell_id)
        again = W.local_dofs_exact(u_h, cell_id)
        assert again == [c[int(g)] for g in W.cell_dofs[cell_id]]


def test_scaling_relation():
    """On an off-reference cell the interpolant is the push-forward of the reference interpolant."""
    m = build_mesh("tet", 2)
    W = build_space("W", m, 2, 2)
    _, v = random_fields(4, 3)
    c = interpolate(W, v, rational=True)
    cell_id = 29
    amap = m.affine_map(cell_id)
    uhat = W.pullback(v.poly, amap)
    lhat = W.el.apply_dofs(uhat)
    ref_interp = VectorPolynomial.zero()
    for l, phi in zip(lhat, W.el.nodal_polynomials()):
        ref_interp = ref_interp + phi * l
    assert W.pullback(W.cell_polynomial(c, cell_id), amap) == ref_interp


def test_quadrature_interpolation_matches_exact():
    m = build_mesh("tet", 2)
    W = build_space("W", m, 2, 2)
    _, v = random_fields(8, 4)
    assert np.allclose(interpolate(W, v, exact=False), interpolate(W, v, exact=True), atol=1e-11)


def test_manufactured_interpolant_converges():
    u = manufactured_problem().u
    table = interpolation_convergence(0, 2, "tet", [2, 4], u)
    e = table.values["e"]
    assert all(np.isfinite(e)) and e[1] < e[0]


def test_wrong_field_kind():
    W = build_space("W", build_mesh("hex", 1), 1, 2)
    with pytest.raises(ValueError):
        interpolate(W, AnalyticField.from_polynomial(Polynomial.constant(1)))


@pytest.mark.slow
@pytest.mark.parametrize("family,expected", [(-1, 1.0), (1, 2.0)])
def test_interpolation_rates(family, expected):
    """Observed orders reach the interpolation estimates (which are upper bounds on the error)."""
    table = interpolation_convergence(family, 2, "tet", [8, 16], manufactured_problem().u)
    assert table.final_rate("e") >= expected - 0.15
    assert table.final_rate("graddiv_e") >= 1.0 - 0.15
    assert table.final_rate("div_e") >= 2.0 - 0.15
