import os
import subprocess
import sys

import numpy as np
import pytest

from gradiv import kernels
from gradiv.analysis import error_norms
from gradiv.assembly import cell_moments, manufactured_problem
from gradiv.fespace import build_space
from gradiv.mesh import build_mesh

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")


@compiled
@pytest.mark.parametrize("cell,r,k,N", [("tet", 1, 2, 2), ("tet", 3, 2, 2), ("hex", 2, 3, 2)])
@pytest.mark.parametrize("quantity", ["value", "div", "graddiv"])
def test_moments_agree(cell, r, k, N, quantity):
    space = build_space("W", build_mesh(cell, N), r, k)
    f = manufactured_problem().f
    f = {"value": f, "div": f.div(), "graddiv": f.div().grad()}[quantity]
    a = cell_moments(space, f, quantity, backend="numpy")
    b = cell_moments(space, f, quantity, backend="cython")
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13 * np.abs(a).max())


@compiled
@pytest.mark.parametrize("cell,r,k", [("tet", 2, 2), ("hex", 1, 2), ("hex", 2, 3)])
def test_error_norms_agree(cell, r, k):
    space = build_space("W", build_mesh(cell, 2), r, k)
    coeffs = np.random.default_rng(0).standard_normal(space.dim) * 1e-3
    u = manufactured_problem().u
    a = error_norms(space, coeffs, u, backend="numpy").values
    b = error_norms(space, coeffs, u, backend="cython").values
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == pytest.approx(b[key], rel=1e-12)


def test_fallback_selected_by_environment():
    env = dict(os.environ, GRADIV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from gradiv import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_unknown_backend_rejected():
    space = build_space("W", build_mesh("tet", 1), 1, 2)
    with pytest.raises((ValueError, ImportError)):
        cell_moments(space, manufactured_problem().f, "value", backend="fortran")
