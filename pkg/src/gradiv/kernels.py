"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``GRADIV_PURE_PYTHON=1`` to force the numpy implementation.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

BACKEND = "numpy"
_impl = _kernels_py
if os.environ.get("GRADIV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
        _impl = _compiled
        BACKEND = "cython"
    except ImportError:
        pass

separable_values = _kernels_py.separable_values


def _select(backend: str | None):
    if backend is None:
        return _impl
    if backend == "numpy":
        return _kernels_py
    if backend == "cython":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    raise ValueError(f"unknown kernel backend {backend!r}")


def separable_moments(cell_idx, T, comp, coef, ix, iy, iz, Phi, backend: str | None = None) -> np.ndarray:
    impl = _select(backend)
    return impl.separable_moments(np.ascontiguousarray(cell_idx, dtype=np.int64), np.ascontiguousarray(T),
                                  np.ascontiguousarray(comp, dtype=np.int64), np.ascontiguousarray(coef, dtype=float),
                                  np.ascontiguousarray(ix, dtype=np.int64), np.ascontiguousarray(iy, dtype=np.int64),
                                  np.ascontiguousarray(iz, dtype=np.int64), np.ascontiguousarray(Phi, dtype=float))


def separable_sqerr(cell_idx, T, comp, coef, ix, iy, iz, Phi, coeffs, omega, backend: str | None = None) -> np.ndarray:
    impl = _select(backend)
    return impl.separable_sqerr(np.ascontiguousarray(cell_idx, dtype=np.int64), np.ascontiguousarray(T),
                                np.ascontiguousarray(comp, dtype=np.int64), np.ascontiguousarray(coef, dtype=float),
                                np.ascontiguousarray(ix, dtype=np.int64), np.ascontiguousarray(iy, dtype=np.int64),
                                np.ascontiguousarray(iz, dtype=np.int64), np.ascontiguousarray(Phi, dtype=float),
                                np.ascontiguousarray(coeffs, dtype=float), np.ascontiguousarray(omega, dtype=float))
