import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradiv.analysis import ErrorReport, RateTable, discrete_norms, error_norms, exact_error_norms, rates
from gradiv.derham import AnalyticField, interpolate, random_polynomial
from gradiv.fespace import build_space
from gradiv.fields import SeparableField
from gradiv.mesh import build_mesh
from gradiv.polyalg import Polynomial, VectorPolynomial

X1 = Polynomial.variable(0)


def _vec(*comps) -> SeparableField:
    return SeparableField.from_polynomial(VectorPolynomial([Polynomial.constant(0) if c is None else c for c in comps]))


def test_rate_examples():
    assert rates([1.0, 0.5], [1.0, 0.5]) == [None, pytest.approx(1.0, abs=1e-15)]
    assert rates([1.0, 0.25], [1.0, 0.5]) == [None, pytest.approx(2.0, abs=1e-15)]


@pytest.mark.parametrize("p", [1, 2, 3])
def test_synthetic_rates(p):
    hs = [1 / N for N in (4, 8, 12, 16, 20, 24)]
    out = rates([h ** p for h in hs], hs)
    assert out[0] is None
    assert all(abs(r - p) <= 1e-12 for r in out[1:])


# mesh sizes are 1/N; sizes a few ulps apart make any rate ill-conditioned
@given(st.lists(st.integers(1, 1000), min_size=2, max_size=6, unique=True), st.floats(0.5, 4.0))
def test_rates_power_law(Ns, p):
    hs = [1 / N for N in sorted(Ns)]
    out = rates([3.0 * h ** p for h in hs], hs)
    assert all(abs(r - p) <= 1e-9 for r in out[1:])


@pytest.mark.parametrize("values,hs", [([1.0], [1.0]), ([1.0, 2.0], [0.5, 1.0]), ([1.0, 2.0], [0.5, 0.5]),
                                        ([1.0, 2.0, 3.0], [1.0, 0.5])])
def test_rate_errors(values, hs):
    with pytest.raises(ValueError):
        rates(values, hs)


def test_zero_values_give_nan():
    assert math.isnan(rates([0.0, 0.0], [1.0, 0.5])[1])


@pytest.mark.parametrize("cell", ["tet", "hex"])
def test_continuous_norms_of_linear_error(cell):
    space = build_space("W", build_mesh(cell, 2), 1, 2)
    rep = error_norms(space, np.zeros(space.dim), _vec(X1, None, None))
    assert rep.values["e"] == pytest.approx(math.sqrt(1 / 3), rel=1e-13)
    assert rep.values["div_e"] == pytest.approx(1.0, rel=1e-13)
    assert rep.values["graddiv_e"] == 0.0


def test_discrete_norms_by_hand():
    space = build_space("W", build_mesh("hex", 3), 1, 2)
    zero = np.zeros(space.dim)
    lin = discrete_norms(space, zero, _vec(X1, None, None))
    assert lin["V_e"] == pytest.approx(math.sqrt(1 / 3), rel=1e-13)
    assert lin["U_div_e"] == pytest.approx(1.0, rel=1e-13)
    assert lin["W_graddiv_e"] == 0.0
    # e = (0, x2^2/2, 0): grad div e = (0, 1, 0)
    quad = discrete_norms(space, zero, _vec(None, Polynomial.variable(1) ** 2 * Polynomial.constant(Fraction(1, 2)), None))
    assert quad["W_graddiv_e"] == pytest.approx(1.0, rel=1e-13)


def test_discrete_norms_reject_tets():
    space = build_space("W", build_mesh("tet", 1), 1, 2)
    with pytest.raises(ValueError):
        discrete_norms(space, np.zeros(space.dim), _vec(X1, None, None))


@pytest.mark.parametrize("cell,r,k", [("tet", 1, 2), ("tet", 2, 2), ("tet", 3, 2), ("hex", 1, 2), ("hex", 2, 2),
                                      ("hex", 3, 2)])
def test_reproduced_polynomial_has_zero_error(cell, r, k):
    rng = np.random.default_rng(r)
    p = VectorPolynomial([random_polynomial(r - 1, rng) for _ in range(3)])
    space = build_space("W", build_mesh(cell, 2), r, k)
    coeffs = interpolate(space, AnalyticField.from_polynomial(p), rational=True)
    assert exact_error_norms(space, coeffs, p).values == {"e": 0.0, "div_e": 0.0, "graddiv_e": 0.0}
    # floating-point norms: rounding in second derivatives scales like |p| h^-2
    f = SeparableField.from_polynomial(p)
    size = {"e": f, "div_e": f.div(), "graddiv_e": f.div().grad(), "V_e": f, "U_div_e": f.div(),
            "W_graddiv_e": f.div().grad()}
    rep = error_norms(space, np.array([float(v) for v in coeffs]), f)
    assert set(rep.values) == ({"e", "div_e", "graddiv_e"} | ({"V_e", "U_div_e", "W_graddiv_e"} if cell == "hex" else set()))
    for name, v in rep.values.items():
        assert v <= 1e-10 * max(1.0, math.sqrt(size[name].l2_squared()))


@pytest.mark.parametrize("r,k", [(1, 2), (2, 3)])
def test_doubled_line_rules_agree(r, k):
    space = build_space("W", build_mesh("hex", 2), r, k)
    coeffs = np.random.default_rng(1).standard_normal(space.dim)
    exact = _vec(X1 ** 3, Polynomial.variable(2) * X1, Polynomial.variable(1) ** 4)
    a = discrete_norms(space, coeffs, exact)
    b = discrete_norms(space, coeffs, exact, line_scale=2)
    for key in a:
        assert abs(a[key] - b[key]) <= 1e-12 * max(1.0, a[key])


def test_discrete_and_continuous_vanish_together():
    space = build_space("W", build_mesh("hex", 2), 1, 2)
    p = VectorPolynomial([Polynomial.constant(1), Polynomial.constant(-2), Polynomial.constant(3)])
    coeffs = interpolate(space, AnalyticField.from_polynomial(p))
    rep = error_norms(space, coeffs, SeparableField.from_polynomial(p))
    assert rep.values["div_e"] <= 1e-12 and rep.values["U_div_e"] <= 1e-12


def _table() -> RateTable:
    reports = [ErrorReport("tet", 1, 2, N, {"e": 1.0 / N, "div_e": 1.0 / N ** 2, "graddiv_e": 0.5 / N})
               for N in (2, 4, 8)]
    return RateTable.from_reports(reports, "tet, k=2, r=1 (family -1)")


def test_csv_format():
    lines = _table().to_csv().splitlines()
    assert lines[0] == "N,h,norm,value,rate"
    assert lines[1] == "2,0.5,e,5.000000e-01,"
    assert lines[4] == "4,0.25,e,2.500000e-01,1.0000"
    assert lines[5] == "4,0.25,div_e,6.250000e-02,2.0000"
    assert len(lines) == 1 + 3 * 3


def test_markdown_format():
    md = _table().to_markdown().splitlines()
    assert md[0] == "**tet, k=2, r=1 (family -1)**"
    assert md[2].startswith("| N | ||e|| | rate | ||div e|| | rate |")
    assert md[-1] == "| 8 | 1.250000e-01 | 1.0000 | 1.562500e-02 | 2.0000 | 6.250000e-02 | 1.0000 |"


def test_dat_format():
    dat = _table().to_dat().splitlines()
    assert dat[0] == "# h e div_e graddiv_e"
    cols = np.loadtxt(dat[1:])
    assert cols.shape == (3, 4)
    assert np.allclose(cols[:, 0], [0.5, 0.25, 0.125])


def test_final_rate_and_empty():
    assert _table().final_rate("div_e") == pytest.approx(2.0)
    with pytest.raises(ValueError):
        RateTable.from_reports([])
