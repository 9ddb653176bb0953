"""Gauss-type quadrature rules on the reference interval, triangle, square, tet and cube."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

_MEASURE = {"interval": 1.0, "tri": 0.5, "square": 1.0, "tet": 1.0 / 6.0, "hex": 1.0}


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, dim) reference coordinates
    weights: np.ndarray  # (n,)
    degree: int
    domain: str

    @property
    def size(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def gauss_jacobi01(n: int, beta: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0,1] for the weight (1-t)^beta."""
    x, w = roots_jacobi(n, beta, 0)
    return (x + 1) / 2, w / 2 ** (beta + 1)


@lru_cache(maxsize=None)
def gauss_lobatto(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1] with n >= 2 points."""
    if n < 2:
        raise ValueError("Lobatto rules need at least two points")
    inner = np.polynomial.legendre.Legendre.basis(n - 1).deriv().roots() if n > 2 else np.array([])
    x = np.concatenate([[-1.0], np.sort(np.real(inner)), [1.0]])
    pn = np.polynomial.legendre.Legendre.basis(n - 1)(x)
    w = 2.0 / (n * (n - 1) * pn ** 2)
    return x, w


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=None)
def rule(domain: str, degree: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree <= degree (per-variable for boxes)."""
    n = max(1, degree // 2 + 1)
    if domain == "interval":
        x, w = gauss_legendre01(n)
        return QuadratureRule(x[:, None], w, 2 * n - 1, domain)
    if domain in ("square", "hex"):
        d = 2 if domain == "square" else 3
        x, w = gauss_legendre01(n)
        grids = np.meshgrid(*([x] * d), indexing="ij")
        wg = np.meshgrid(*([w] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids[::-1]], axis=1)
        wts = np.prod(np.stack([g.ravel() for g in wg]), axis=0)
        return QuadratureRule(pts, wts, 2 * n - 1, domain)
    if domain == "tri":
        a, wa = gauss_jacobi01(n, 1)
        b, wb = gauss_legendre01(n)
        A, B = np.meshgrid(a, b, indexing="ij")
        WA, WB = np.meshgrid(wa, wb, indexing="ij")
        s = A.ravel()
        t = (B * (1 - A)).ravel()
        return QuadratureRule(np.stack([s, t], axis=1), (WA * WB).ravel(), 2 * n - 1, domain)
    if domain == "tet":
        a, wa = gauss_jacobi01(n, 2)
        b, wb = gauss_jacobi01(n, 1)
        c, wc = gauss_legendre01(n)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        WA, WB, WC = np.meshgrid(wa, wb, wc, indexing="ij")
        x = A
        y = B * (1 - A)
        z = C * (1 - A) * (1 - B)
        pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
        return QuadratureRule(pts, (WA * WB * WC).ravel(), 2 * n - 1, domain)
    raise ValueError(f"unknown domain {domain!r}")


def measure(domain: str) -> float:
    return _MEASURE[domain]
