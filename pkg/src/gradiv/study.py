"""Manufactured-solution studies: assemble, solve and measure errors over a mesh sequence."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import ErrorReport, RateTable, error_norms
from .assembly import DegenerateSystemError, LinearSystem, ManufacturedProblem, assemble, energy_functional, manufactured_problem
from .derham import AnalyticField, interpolate
from .fespace import build_space
from .mesh import build_mesh
from .solver import NoConvergenceError, NotSPDError, SolveReport, solve_spd


@dataclass
class StudyRow:
    cell: str
    r: int
    k: int
    N: int
    unknowns: int = 0
    report: ErrorReport | None = None
    solve: SolveReport | None = None
    orthogonality: float = math.nan  # ||a(u - u_h, w_i)|| / ||b|| over free basis functions
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def galerkin_residuals(system: LinearSystem, x: np.ndarray, problem: ManufacturedProblem) -> tuple[float, float]:
    """(discrete, exact) residuals: ||A x - b|| and ||a(u, w_i) - A x|| relative to ||b||."""
    g = energy_functional(system.space, problem.u, problem.graddiv_u)[system.free]
    Ax = system.A @ x
    nb = np.linalg.norm(system.b)
    return float(np.linalg.norm(Ax - system.b) / nb), float(np.linalg.norm(g - Ax) / nb)


def interpolant_guess(system: LinearSystem, problem: ManufacturedProblem) -> np.ndarray:
    """Free-DOF part of the interpolant of the exact solution (a CG starting vector)."""
    full = interpolate(system.space, AnalyticField.from_separable(problem.u), exact=False)
    return full[system.free]


def solve_case(cell: str, r: int, k: int, N: int, method: str = "direct", tol: float = 1e-12,
               problem: ManufacturedProblem | None = None, orthogonality: bool = False) -> StudyRow:
    """One mesh of a convergence study; a degenerate system becomes an error row."""
    problem = problem or manufactured_problem()
    row = StudyRow(cell, r, k, N)
    space = build_space("W", build_mesh(cell, N), r, k)
    try:
        system = assemble(space, problem.f)
    except DegenerateSystemError as exc:
        row.error = str(exc)
        return row
    row.unknowns = system.size
    x0 = interpolant_guess(system, problem) if method == "cg" else None
    try:
        row.solve = solve_spd(system, method=method, tol=tol, x0=x0)
    except (NoConvergenceError, NotSPDError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.report = error_norms(space, system.expand(row.solve.x), problem.u)
    if orthogonality:
        row.orthogonality = galerkin_residuals(system, row.solve.x, problem)[1]
    return row


@dataclass
class Study:
    cell: str
    r: int
    k: int
    rows: list[StudyRow] = field(default_factory=list)

    @property
    def family(self) -> int:
        return self.r - self.k

    def table(self) -> RateTable:
        good = [row.report for row in self.rows if row.ok]
        title = f"{self.cell}, k={self.k}, r={self.r} (family {self.family:+d})"
        return RateTable.from_reports(good, title)


def run_study(cell: str, r: int, k: int, Ns: Sequence[int], method: str = "direct", tol: float = 1e-12,
              orthogonality: bool = False) -> Study:
    problem = manufactured_problem()
    study = Study(cell, r, k)
    for N in Ns:
        study.rows.append(solve_case(cell, r, k, N, method, tol, problem, orthogonality))
    return study
