"""Sparse symmetric linear algebra: assembly helpers, PCG and constrained saddle-point solves.

Matrices are ``scipy.sparse.csr_matrix`` with sorted, duplicate-free indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    relative_residual: float
    converged: bool


class SolverError(RuntimeError):
    def __init__(self, message: str, report: SolverReport | None = None):
        super().__init__(message)
        self.report = report


def from_triplets(rows, cols, vals, shape) -> sp.csr_matrix:
    """Compress COO triplets, summing duplicates, into canonical CSR."""
    A = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A, rtol: float = 1e-12) -> bool:
    A = sp.csr_matrix(A)
    amax = abs(A).max() if A.nnz else 0.0
    if amax == 0.0:
        return True
    diff = A - A.T
    return (abs(diff).max() if diff.nnz else 0.0) <= rtol * amax


def restrict(A, rows, cols=None) -> sp.csr_matrix:
    cols = rows if cols is None else cols
    out = sp.csr_matrix(A)[rows][:, cols]
    out.sort_indices()
    return out


def cg_solve(A, b, tol: float = 1e-10, max_iter: int | None = None, preconditioner: str = "none", x0=None):
    """Preconditioned conjugate gradients for SPD ``A``.

    ``A`` may be anything supporting ``A @ x``; the Jacobi preconditioner needs
    ``A.diagonal()``. Returns ``(x, SolverReport)``; non-convergence is reported,
    not raised.
    """
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape[0] != A.shape[1] or b.shape != (n,):
        raise ValueError(f"dimension mismatch: A {A.shape}, b {b.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_iter = 10 * n if max_iter is None else max_iter

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)

    if preconditioner == "jacobi":
        inv_diag = 1.0 / np.asarray(A.diagonal(), dtype=float)

        def M(r):
            return inv_diag * r
    elif preconditioner == "none":

        def M(r):
            return r
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return x, SolverReport(0, rel, True)
    z = M(r)
    p = z.copy()
    rz = r @ z
    best_x, best_rel = x.copy(), rel
    it = 0
    while it < max_iter:
        it += 1
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel < best_rel:
            best_x, best_rel = x.copy(), rel
        if rel <= tol:
            return x, SolverReport(it, rel, True)
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return best_x, SolverReport(it, best_rel, False)


def _nonzero_rows(C: sp.csr_matrix) -> sp.csr_matrix:
    C = sp.csr_matrix(C)
    C.eliminate_zeros()
    keep = np.flatnonzero(np.diff(C.indptr) > 0)
    return C[keep]


def saddle_solve(A, C, rhs_list, method: str = "direct", outer_tol: float = 1e-9, inner_tol: float = 1e-11):
    """Solve ``A q + C^T lam = r, C q = 0`` for every ``r`` in ``rhs_list``.

    Uses the Schur complement ``C A^{-1} C^T``. With ``method="cg"`` both the
    Schur system and the ``A^{-1}`` applications are Jacobi/plain CG solves;
    with ``method="direct"`` ``A`` is LU-factored once and the (small) Schur
    matrix is Cholesky-factored, both shared by all right-hand sides.
    """
    A = sp.csc_matrix(A)
    n = A.shape[0]
    rhs_list = [np.asarray(r, dtype=float) for r in rhs_list]
    for r in rhs_list:
        if r.shape != (n,):
            raise ValueError(f"rhs of shape {r.shape} does not match A of size {n}")
    if n == 0:
        return [np.zeros(0) for _ in rhs_list]
    C = _nonzero_rows(C)
    if C.shape[1] != n:
        raise ValueError(f"constraint matrix has {C.shape[1]} columns, expected {n}")
    m = C.shape[0]

    if method == "direct":
        lu = spla.splu(A)
        if m == 0:
            return [lu.solve(r) for r in rhs_list]
        Y = lu.solve(C.T.toarray())
        schur = C @ Y
        schur = 0.5 * (schur + schur.T)
        try:
            chol = scipy.linalg.cho_factor(schur)
        except np.linalg.LinAlgError as exc:
            raise SolverError("constraint matrix is rank deficient") from exc
        if np.min(np.abs(np.diag(chol[0]))) ** 2 <= 1e-13 * np.max(np.abs(np.diag(schur))):
            raise SolverError("constraint matrix is rank deficient")
        out = []
        for r in rhs_list:
            x = lu.solve(r)
            lam = scipy.linalg.cho_solve(chol, C @ x)
            out.append(x - Y @ lam)
        return out

    if method != "cg":
        raise ValueError(f"unknown saddle method {method!r}")

    def inv_A(v):
        x, rep = cg_solve(A, v, tol=inner_tol, preconditioner="jacobi")
        if not rep.converged:
            raise SolverError("inner CG did not converge", rep)
        return x

    if m == 0:
        return [inv_A(r) for r in rhs_list]
    if np.linalg.matrix_rank(C.toarray()) < m:
        raise SolverError("constraint matrix is rank deficient")
    CT = C.T.tocsr()
    schur = spla.LinearOperator((m, m), matvec=lambda lam: C @ inv_A(CT @ lam), dtype=float)
    out = []
    for r in rhs_list:
        x = inv_A(r)
        lam, rep = cg_solve(schur, C @ x, tol=outer_tol, max_iter=10 * m + 10)
        if not rep.converged:
            raise SolverError("outer Schur CG did not converge", rep)
        out.append(x - inv_A(CT @ lam))
    return out


def write_matrix_market(path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
