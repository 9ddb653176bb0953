"""Numpy implementation of the per-cell quadrature kernels (reference and fallback)."""
from __future__ import annotations

import numpy as np


def separable_values(cell_idx: np.ndarray, T: np.ndarray, comp: np.ndarray, coef: np.ndarray,
                     ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, ncomp: int) -> np.ndarray:
    """F[c, q, j] of a separable field at lattice-shifted points, shape (K, Q, ncomp)."""
    K, Q = len(cell_idx), T.shape[3]
    F = np.zeros((K, Q, ncomp))
    gathered: dict = {}

    def g(d: int, p: int) -> np.ndarray:
        key = (d, p)
        if key not in gathered:
            gathered[key] = T[d, p, cell_idx[:, d]]
        return gathered[key]

    for t in range(len(coef)):
        F[:, :, comp[t]] += coef[t] * g(0, ix[t]) * g(1, iy[t]) * g(2, iz[t])
    return F


def separable_moments(cell_idx: np.ndarray, T: np.ndarray, comp: np.ndarray, coef: np.ndarray,
                      ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, Phi: np.ndarray,
                      chunk: int = 512) -> np.ndarray:
    """out[c, i] = sum_q sum_j F[c, q, j] Phi[q, j, i] for a separable field F."""
    K = len(cell_idx)
    Q, C, n = Phi.shape
    out = np.empty((K, n))
    Phi2 = Phi.reshape(Q * C, n)
    for s in range(0, K, chunk):
        ci = cell_idx[s:s + chunk]
        F = separable_values(ci, T, comp, coef, ix, iy, iz, C)
        out[s:s + chunk] = F.reshape(len(ci), Q * C) @ Phi2
    return out


def separable_sqerr(cell_idx: np.ndarray, T: np.ndarray, comp: np.ndarray, coef: np.ndarray,
                    ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, Phi: np.ndarray, coeffs: np.ndarray,
                    omega: np.ndarray, chunk: int = 256) -> np.ndarray:
    """out[c] = sum_q sum_j omega[q, j] (F[c, q, j] - sum_i coeffs[c, i] Phi[q, j, i])^2."""
    K = len(cell_idx)
    Q, C, n = Phi.shape
    out = np.empty(K)
    Phi2 = Phi.reshape(Q * C, n)
    for s in range(0, K, chunk):
        ci = cell_idx[s:s + chunk]
        F = separable_values(ci, T, comp, coef, ix, iy, iz, C).reshape(len(ci), Q * C)
        E = F - coeffs[s:s + chunk] @ Phi2.T
        out[s:s + chunk] = (E * E) @ omega.reshape(Q * C)
    return out
