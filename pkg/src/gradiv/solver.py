"""Sparse SPD solvers: supernodal Cholesky and Jacobi-preconditioned CG."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

try:  # CHOLMOD through scikit-sparse, when installed
    from sksparse.cholmod import CholmodNotPositiveDefiniteError, cholesky as _cholmod
except ImportError:  # pragma: no cover - exercised only without scikit-sparse
    _cholmod = None
    CholmodNotPositiveDefiniteError = None

DENSE_LIMIT = 3000  # fallback Cholesky is dense below this size
FLOOR_FACTOR = 4.0  # a residual within this factor of the rounding floor counts as converged
EPS = np.finfo(float).eps


class NotSPDError(np.linalg.LinAlgError):
    """Cholesky met a non-positive pivot."""


class NoConvergenceError(RuntimeError):
    """CG hit its iteration cap before reaching the tolerance."""


@dataclass
class SolveReport:
    """Outcome of a solve.

    ``floor`` estimates the smallest relative residual a double-precision
    solution vector can show, eps * || |A| |x| || / ||b||; the fourth-order
    systems on fine meshes have floors above 1e-12.
    """

    method: str
    iterations: int
    residual: float
    x: np.ndarray
    floor: float = 0.0

    @property
    def roundoff_limited(self) -> bool:
        return self.residual > 0 and self.residual <= FLOOR_FACTOR * self.floor


def _as_system(system, b=None):
    if b is None:
        return sp.csr_matrix(system.A), np.asarray(system.b, dtype=float)
    return sp.csr_matrix(system), np.asarray(b, dtype=float)


def relative_residual(A, x: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb else float(r)


def residual_floor(A, x: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(EPS * np.linalg.norm(abs(A) @ np.abs(x)) / nb) if nb else 0.0


def _target(tol: float, A, x, b) -> tuple[float, float]:
    fl = residual_floor(A, x, b)
    return max(tol, FLOOR_FACTOR * fl), fl


def _direct(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    if _cholmod is not None:
        try:
            factor = _cholmod(sp.csc_matrix(A), mode="supernodal")  # LL^T rejects indefinite input
        except CholmodNotPositiveDefiniteError as exc:
            raise NotSPDError(str(exc)) from exc
        return factor(b)
    if A.shape[0] > DENSE_LIMIT:
        raise RuntimeError("sparse Cholesky needs scikit-sparse; use the cg method for large systems")
    try:
        c = sla.cho_factor(A.toarray())
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(str(exc)) from exc
    return sla.cho_solve(c, b)


def solve_spd(system, b: np.ndarray | None = None, method: str = "direct", tol: float = 1e-12,
              x0: np.ndarray | None = None, refine: int = 3) -> SolveReport:
    """Solve A x = b for a symmetric positive definite A.

    ``system`` is a LinearSystem or a sparse matrix (then ``b`` is required).
    The direct path adds up to ``refine`` steps of iterative refinement when
    the first solve misses ``tol``.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError("tolerance must lie in (0, 1e-6]")
    A, rhs = _as_system(system, b)
    n = A.shape[0]
    if n == 0:
        return SolveReport(method, 0, 0.0, np.zeros(0))
    if method == "direct":
        x = _direct(A, rhs)
        steps = 0
        res = relative_residual(A, x, rhs)
        while res > _target(tol, A, x, rhs)[0] and steps < refine:
            x = x + _direct(A, rhs - A @ x)
            steps += 1
            res = relative_residual(A, x, rhs)
        target, fl = _target(tol, A, x, rhs)
        if res > target:
            raise NoConvergenceError(f"direct solve residual {res:.3e} above {target:.3e}")
        return SolveReport("direct-cholesky", steps, res, x, fl)
    if method == "cg":
        x, its = pcg_jacobi(A, rhs, tol, x0, maxiter=50 * n)
        return SolveReport("cg-jacobi", its, relative_residual(A, x, rhs), x, residual_floor(A, x, rhs))
    raise ValueError(f"unknown solver method {method!r}")


def pcg_jacobi(A: sp.csr_matrix, b: np.ndarray, tol: float, x0: np.ndarray | None = None,
               maxiter: int | None = None, max_stalls: int = 3) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned CG, restarted from the current iterate when the recursive residual
    has reached the target but the true residual has not.

    Stops when the true relative residual reaches max(tol, FLOOR_FACTOR x rounding floor).
    Each restart shrinks the drift between the two residuals; ``max_stalls`` consecutive
    restarts that fail to halve the true residual count as stagnation.
    """
    n = A.shape[0]
    maxiter = 50 * n if maxiter is None else maxiter
    d = A.diagonal()
    if np.any(d <= 0):
        raise NotSPDError("non-positive diagonal entry")
    dinv = 1.0 / d
    nb = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if nb == 0:
        return np.zeros(n), 0
    absA = abs(A)

    def check() -> tuple[np.ndarray, float, float]:
        r = b - A @ x
        return r, np.linalg.norm(r) / nb, max(tol, FLOOR_FACTOR * EPS * np.linalg.norm(absA @ np.abs(x)) / nb)

    r, true_rel, target = check()
    if true_rel <= target:
        return x, 0
    it, stalls, best = 0, 0, true_rel
    while it < maxiter:
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while it < maxiter:
            it += 1
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                raise NotSPDError("CG met a direction of non-positive curvature")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            if np.linalg.norm(r) / nb <= target:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r, true_rel, target = check()
        if true_rel <= target:
            return x, it
        stalls = stalls + 1 if true_rel > 0.5 * best else 0
        best = min(best, true_rel)
        if stalls >= max_stalls:
            raise NoConvergenceError(f"CG stagnated at residual {true_rel:.3e} (target {target:.3e})")
    raise NoConvergenceError(f"CG did not reach {tol:.1e} in {maxiter} iterations "
                             f"(residual {np.linalg.norm(b - A @ x) / nb:.3e})")
