# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled per-cell quadrature kernels; same contract as ``_kernels_py``."""
import numpy as np

ctypedef long long i64


def separable_moments(const i64[:, ::1] cell_idx, const double[:, :, :, ::1] T, const i64[::1] comp,
                      const double[::1] coef, const i64[::1] ix, const i64[::1] iy, const i64[::1] iz,
                      const double[:, :, ::1] Phi, Py_ssize_t chunk=0):
    cdef Py_ssize_t K = cell_idx.shape[0]
    cdef Py_ssize_t Q = Phi.shape[0]
    cdef Py_ssize_t C = Phi.shape[1]
    cdef Py_ssize_t n = Phi.shape[2]
    cdef Py_ssize_t nt = coef.shape[0]
    if C > 3:
        raise ValueError("at most three components")
    out = np.zeros((K, n))
    cdef double[:, ::1] o = out
    cdef double F[3]
    cdef Py_ssize_t c, q, t, j, i
    cdef i64 i0, i1, i2
    cdef double f
    with nogil:
        for c in range(K):
            i0 = cell_idx[c, 0]
            i1 = cell_idx[c, 1]
            i2 = cell_idx[c, 2]
            for q in range(Q):
                F[0] = 0.0
                F[1] = 0.0
                F[2] = 0.0
                for t in range(nt):
                    F[comp[t]] += coef[t] * T[0, ix[t], i0, q] * T[1, iy[t], i1, q] * T[2, iz[t], i2, q]
                for j in range(C):
                    f = F[j]
                    if f != 0.0:
                        for i in range(n):
                            o[c, i] += f * Phi[q, j, i]
    return out


def separable_sqerr(const i64[:, ::1] cell_idx, const double[:, :, :, ::1] T, const i64[::1] comp,
                    const double[::1] coef, const i64[::1] ix, const i64[::1] iy, const i64[::1] iz,
                    const double[:, :, ::1] Phi, const double[:, ::1] coeffs, const double[:, ::1] omega,
                    Py_ssize_t chunk=0):
    cdef Py_ssize_t K = cell_idx.shape[0]
    cdef Py_ssize_t Q = Phi.shape[0]
    cdef Py_ssize_t C = Phi.shape[1]
    cdef Py_ssize_t n = Phi.shape[2]
    cdef Py_ssize_t nt = coef.shape[0]
    if C > 3:
        raise ValueError("at most three components")
    out = np.zeros(K)
    cdef double[::1] o = out
    cdef double F[3]
    cdef Py_ssize_t c, q, t, j, i
    cdef i64 i0, i1, i2
    cdef double e, acc
    with nogil:
        for c in range(K):
            i0 = cell_idx[c, 0]
            i1 = cell_idx[c, 1]
            i2 = cell_idx[c, 2]
            acc = 0.0
            for q in range(Q):
                F[0] = 0.0
                F[1] = 0.0
                F[2] = 0.0
                for t in range(nt):
                    F[comp[t]] += coef[t] * T[0, ix[t], i0, q] * T[1, iy[t], i1, q] * T[2, iz[t], i2, q]
                for j in range(C):
                    if omega[q, j] == 0.0:
                        continue
                    e = F[j]
                    for i in range(n):
                        e -= coeffs[c, i] * Phi[q, j, i]
                    acc += omega[q, j] * e * e
            o[c] = acc
    return out
