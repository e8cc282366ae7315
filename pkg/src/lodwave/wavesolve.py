"""Initial-data projections, Newmark and Crank-Nicolson time stepping, fine reference solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import FineOperators
from .correctors import CorrectorBasis, MultiscaleSystem, assemble_ms_load
from .sparse import SolverError, SolverReport, cg_solve


@dataclass(frozen=True)
class InitialData:
    f_bar: np.ndarray
    g_bar: np.ndarray
    mode_f: str = "elliptic"


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    xi: np.ndarray  # (J+1, n)
    eta: np.ndarray | None = None
    reports: tuple = ()

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def J(self) -> int:
        return len(self.times) - 1

    def index_of(self, t: float) -> int:
        n = int(round(t / self.dt))
        if not np.isclose(self.times[n], t, rtol=0, atol=1e-12):
            raise ValueError(f"t={t} is not a time step")
        return n

    def derivative(self, n: int) -> np.ndarray:
        """Left-sided time derivative of the piecewise linear interpolant at step n."""
        if n < 1:
            raise ValueError("time derivative needs n >= 1")
        return (self.xi[n] - self.xi[n - 1]) / self.dt

    def scaled(self, c: float) -> "Trajectory":
        eta = None if self.eta is None else c * self.eta
        return Trajectory(self.times, c * self.xi, eta, self.reports)


def _cholesky_solve(mat: np.ndarray, rhs, what: str):
    try:
        fac = scipy.linalg.cho_factor(mat)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"{what}: matrix is not positive definite") from exc
    return scipy.linalg.cho_solve(fac, rhs)


def project_initial_elliptic(ms: MultiscaleSystem, basis: CorrectorBasis, A_h, f_fine) -> np.ndarray:
    """Coefficients of the energy projection of ``f_fine`` onto span(psi)."""
    f = np.asarray(f_fine, dtype=float)
    if not f.any():
        return np.zeros(ms.N)
    r = basis.psi.T @ (A_h @ f)
    return _cholesky_solve(ms.S, r, "elliptic projection")


def project_initial_l2(ms: MultiscaleSystem, basis: CorrectorBasis, M_h, g_fine) -> np.ndarray:
    g = np.asarray(g_fine, dtype=float)
    if not g.any():
        return np.zeros(ms.N)
    r = basis.psi.T @ (M_h @ g)
    return _cholesky_solve(ms.M, r, "L2 projection")


class _LinearSolver:
    """Reusable solver for the constant time-stepping matrix."""

    def __init__(self, mat, tol: float, refactor: bool = False):
        self.mat = mat
        self.tol = tol
        self.refactor = refactor
        self.dense = not sp.issparse(mat)
        if self.dense and not refactor:
            self._fac = self._factor()
        self.last = None

    def _factor(self):
        try:
            return scipy.linalg.cho_factor(self.mat)
        except np.linalg.LinAlgError as exc:
            raise SolverError("time-stepping matrix is not positive definite") from exc

    def __call__(self, rhs, n: int):
        if self.dense:
            fac = self._factor() if self.refactor else self._fac
            return scipy.linalg.cho_solve(fac, rhs), None
        x, rep = cg_solve(self.mat, rhs, tol=self.tol, preconditioner="jacobi", x0=self.last)
        if not rep.converged:
            raise SolverError(f"CG failed at time step {n}", rep)
        self.last = x
        return x, rep


def crank_nicolson_run(S, M, load, init: InitialData, dt: float, J: int, tol: float = 1e-10,
                       refactor: bool = False) -> Trajectory:
    """Two-field Crank-Nicolson scheme for ``M xi'' + S xi = G(t)``.

    ``load`` maps ``t`` to the load vector (or is None for zero load). Dense
    matrices are Cholesky-factored once; sparse ones use Jacobi-CG.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    c = dt * dt / 4.0
    lhs = c * S + M
    rhs_mat = M - c * S
    solve = _LinearSolver(lhs, tol, refactor)
    xi = [np.asarray(init.f_bar, dtype=float)]
    eta = [np.asarray(init.g_bar, dtype=float)]
    G_prev = None if load is None else load(0.0)
    reports: list[SolverReport] = []
    for n in range(1, J + 1):
        rhs = rhs_mat @ eta[-1] - dt * (S @ xi[-1])
        if load is not None:
            G_now = load(n * dt)
            rhs = rhs + dt * 0.5 * (G_now + G_prev)
            G_prev = G_now
        try:
            eta_n, rep = solve(rhs, n)
        except SolverError as exc:
            raise SolverError(f"Crank-Nicolson step {n}: {exc}", exc.report) from exc
        if rep is not None:
            reports.append(rep)
        xi.append(0.5 * dt * (eta_n + eta[-1]) + xi[-1])
        eta.append(eta_n)
    times = np.arange(J + 1) * dt
    return Trajectory(times, np.array(xi), np.array(eta), tuple(reports))


def newmark_run(S, M, loads, xi0, xi1, beta: float, gamma: float, dt: float, J: int, tol: float = 1e-10) -> Trajectory:
    """Three-term Newmark recurrence for ``M xi'' + S xi = G``.

    ``loads(n)`` returns the load ``G^(n)`` used to advance from step n to
    n+1 (or ``loads`` is None for zero load).
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if J < 1:
        raise ValueError("J must be >= 1")
    w_now = 1.0 - 4.0 * beta + 2.0 * gamma
    w_old = 1.0 + 2.0 * beta - 2.0 * gamma
    inv_dt2 = 1.0 / (dt * dt)
    solve = _LinearSolver(inv_dt2 * M + beta * S, tol)
    xi = [np.asarray(xi0, dtype=float), np.asarray(xi1, dtype=float)]
    for n in range(1, J):
        rhs = inv_dt2 * (M @ (2.0 * xi[n] - xi[n - 1])) - 0.5 * (S @ (w_now * xi[n] + w_old * xi[n - 1]))
        if loads is not None:
            rhs = rhs + loads(n)
        try:
            x, _ = solve(rhs, n)
        except SolverError as exc:
            raise SolverError(f"Newmark step {n}: {exc}", exc.report) from exc
        xi.append(x)
    times = np.arange(J + 1) * dt
    return Trajectory(times, np.array(xi[: J + 1]))


def fine_load_assembler(fine_ops: FineOperators, problem):
    """``t -> (F(., t), lambda_i)`` on fine interior nodes, cached when F is time independent."""
    if problem.source_is_zero:
        return None
    if not problem.time_dependent:
        b = fine_ops.load(problem.source, 0.0)
        return lambda t: b
    return lambda t: fine_ops.load(problem.source, t)


def reference_solve(fine_ops: FineOperators, problem, dt: float, J: int, tol: float = 1e-10) -> Trajectory:
    """Fine-scale Crank-Nicolson reference with nodally interpolated initial data."""
    init = InitialData(fine_ops.interpolate(problem.f), fine_ops.interpolate(problem.g), "nodal")
    return crank_nicolson_run(fine_ops.A_h, fine_ops.M_h, fine_load_assembler(fine_ops, problem), init, dt, J, tol)


def multiscale_initial_data(ms: MultiscaleSystem, basis: CorrectorBasis, fine_ops: FineOperators, problem,
                            f_projection: str = "elliptic", g_projection: str = "l2") -> InitialData:
    def project(func, mode):
        values = fine_ops.interpolate(func)
        if mode == "elliptic":
            return project_initial_elliptic(ms, basis, fine_ops.A_h, values)
        if mode == "l2":
            return project_initial_l2(ms, basis, fine_ops.M_h, values)
        raise ValueError(f"unknown projection {mode!r}")

    return InitialData(project(problem.f, f_projection), project(problem.g, g_projection), f_projection)


def multiscale_solve(ms: MultiscaleSystem, basis: CorrectorBasis, fine_ops: FineOperators, problem, dt: float, J: int,
                     f_projection: str = "elliptic", g_projection: str = "l2") -> Trajectory:
    init = multiscale_initial_data(ms, basis, fine_ops, problem, f_projection, g_projection)
    fine_load = fine_load_assembler(fine_ops, problem)
    if fine_load is None:
        load = None
    elif not problem.time_dependent:
        G = assemble_ms_load(basis, fine_load(0.0))
        load = lambda t: G  # noqa: E731
    else:
        load = lambda t: assemble_ms_load(basis, fine_load(t))  # noqa: E731
    return crank_nicolson_run(ms.S, ms.M, load, init, dt, J)
