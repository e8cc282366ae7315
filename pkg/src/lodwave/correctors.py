"""Localized element correctors, multiscale basis and corrected Galerkin matrices."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import CoefficientField, local_stiffness
from .interpolation import ClementOperator, constraint_matrix, coarse_barycentrics
from .mesh import MeshHierarchy, PatchBuilder
from .sparse import SolverError, restrict, saddle_solve

log = logging.getLogger(__name__)


def coefficient_hash(field: CoefficientField) -> str:
    return hashlib.sha256(np.ascontiguousarray(field.values).tobytes()).hexdigest()


@dataclass
class _ElementResult:
    K: int
    free: np.ndarray  # fine interior indices
    coarse: np.ndarray  # coarse interior indices of K's interior vertices
    values: np.ndarray  # (len(free), len(coarse))
    n_constraints: int


class CorrectorSolver:
    """Solves the per-element corrector problems of one hierarchy and coefficient."""

    def __init__(self, hier: MeshHierarchy, A_full: sp.csr_matrix, field: CoefficientField, clement: ClementOperator,
                 method: str = "direct", outer_tol: float = 1e-9, inner_tol: float = 1e-11):
        self.hier = hier
        self.A_full = sp.csr_matrix(A_full)
        self.field = field
        self.clement = clement
        self.method = method
        self.outer_tol = outer_tol
        self.inner_tol = inner_tol
        self.patches = PatchBuilder(hier)
        self.local_A = local_stiffness(hier.fine) * field.values[:, None, None]

    def rhs_full(self, K: int, local_vertex: int) -> np.ndarray:
        """``-int_K a grad(Phi_z) . grad(lambda_i)`` for every fine vertex i."""
        fine = self.hier.fine
        children = self.hier.coarse_to_fine_elements[K]
        tris = fine.triangles[children]
        lam = coarse_barycentrics(self.hier, K, fine.vertices[tris.ravel()])[:, local_vertex].reshape(-1, 3)
        contrib = np.einsum("tij,tj->ti", self.local_A[children], lam)
        return -np.bincount(tris.ravel(), weights=contrib.ravel(), minlength=fine.n_vertices)

    def solve_element(self, K: int, k: int, vertices=None) -> _ElementResult:
        hier = self.hier
        patch = self.patches(K, k)
        zs = hier.coarse.triangles[K]
        local = [i for i, z in enumerate(zs) if not hier.coarse.boundary_flags[z]]
        if vertices is not None:
            local = [i for i in local if zs[i] in vertices]
        coarse = hier.coarse.interior_node_index[zs[local]]
        free_full = patch.fine_free_nodes
        free = hier.fine.interior_node_index[free_full]
        if not local or len(free_full) == 0:
            return _ElementResult(K, free, coarse, np.zeros((len(free), len(local))), 0)
        A = restrict(self.A_full, free_full)
        C = constraint_matrix(self.clement, patch)
        rhs = [self.rhs_full(K, i)[free_full] for i in local]
        try:
            sols = saddle_solve(A, C, rhs, method=self.method, outer_tol=self.outer_tol, inner_tol=self.inner_tol)
        except SolverError as exc:
            raise SolverError(f"corrector solve failed for K={K}, k={k}: {exc}", exc.report) from exc
        return _ElementResult(K, free, coarse, np.column_stack(sols), C.shape[0])

    def elements_for(self, nodes) -> np.ndarray:
        """Coarse elements having one of the given coarse vertices."""
        tris = self.hier.coarse.triangles
        return np.flatnonzero(np.isin(tris, nodes).any(axis=1))


def element_correctors(hier: MeshHierarchy, A_full, field: CoefficientField, clement: ClementOperator, K: int, k: int,
                       method: str = "direct") -> list[np.ndarray]:
    """Correctors of the three hats of ``K`` on the patch ``U_k(K)``, as full fine vectors.

    Entries belonging to boundary vertices of ``K`` are zero vectors.
    """
    solver = CorrectorSolver(hier, A_full, field, clement, method=method)
    res = solver.solve_element(K, k)
    fine = hier.fine
    out = [np.zeros(fine.n_vertices) for _ in range(3)]
    zs = hier.coarse.triangles[K]
    cidx = list(res.coarse)
    for i, z in enumerate(zs):
        ci = hier.coarse.interior_node_index[z]
        if ci >= 0 and ci in cidx:
            out[i][fine.interior_nodes[res.free]] = res.values[:, cidx.index(ci)]
    return out


@dataclass(frozen=True, eq=False)
class CorrectorBasis:
    """Columns: coarse interior nodes. Rows: fine interior nodes.

    ``phi`` holds the fine representation of the coarse hats, ``Q`` their
    correctors and ``psi = phi + Q`` the multiscale basis.
    """

    k: int
    phi: sp.csc_matrix
    Q: sp.csc_matrix
    H: float
    h: float
    coefficient_hash: str = ""
    stats: dict = field(default_factory=dict)
    psi: sp.csc_matrix = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "psi", (self.phi + self.Q).tocsc())

    @property
    def n_coarse(self) -> int:
        return self.phi.shape[1]

    def support(self, j: int) -> np.ndarray:
        return self.Q.indices[self.Q.indptr[j] : self.Q.indptr[j + 1]]

    def reconstruct(self, coeffs) -> np.ndarray:
        return self.psi @ np.asarray(coeffs, dtype=float)

    def coarse_part(self, coeffs) -> np.ndarray:
        return self.phi @ np.asarray(coeffs, dtype=float)


def build_corrector_basis(hier: MeshHierarchy, A_full, field: CoefficientField, clement: ClementOperator, k: int,
                          threads: int = 1, method: str = "direct", nodes=None) -> CorrectorBasis:
    """Sum element correctors into ``Q_{h,k}(Phi_z)`` for every interior coarse node.

    With ``nodes`` (coarse vertex ids) only those columns are computed, the
    rest of ``Q`` stays zero.
    """
    solver = CorrectorSolver(hier, A_full, field, clement, method=method)
    if nodes is None:
        elements = np.arange(hier.coarse.n_triangles)
        vertices = None
    else:
        vertices = set(int(z) for z in nodes)
        elements = solver.elements_for(list(vertices))

    t0 = time.perf_counter()

    def task(K):
        return solver.solve_element(int(K), k, vertices)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, elements))
    else:
        results = [task(K) for K in elements]

    # accumulate in element order so the sums are reproducible
    rows, cols, vals = [], [], []
    for res in results:
        for j, c in enumerate(res.coarse):
            rows.append(res.free)
            cols.append(np.full(len(res.free), c))
            vals.append(res.values[:, j])
    n_fine = hier.fine.n_interior
    n_coarse = hier.coarse.n_interior
    if rows:
        Q = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_fine, n_coarse)
        )
    else:
        Q = sp.csc_matrix((n_fine, n_coarse))
    Q.sum_duplicates()
    Q.sort_indices()
    stats = {
        "elements": int(len(elements)),
        "max_patch_dofs": int(max((len(r.free) for r in results), default=0)),
        "max_constraints": int(max((r.n_constraints for r in results), default=0)),
        "seconds": time.perf_counter() - t0,
    }
    log.info("correctors k=%d: %s", k, stats)
    return CorrectorBasis(k, clement.prolongation.tocsc(), Q, hier.H, hier.h, coefficient_hash(field), stats)


@dataclass(frozen=True, eq=False)
class MultiscaleSystem:
    S: np.ndarray
    M: np.ndarray

    @property
    def N(self) -> int:
        return self.S.shape[0]


def assemble_multiscale(basis: CorrectorBasis, A_h, M_h) -> MultiscaleSystem:
    """Corrected stiffness and mass matrices on the multiscale basis (dense, symmetrized)."""
    psi = basis.psi
    S = (psi.T @ (A_h @ psi)).toarray()
    M = (psi.T @ (M_h @ psi)).toarray()
    return MultiscaleSystem(0.5 * (S + S.T), 0.5 * (M + M.T))


def assemble_ms_load(basis: CorrectorBasis, fine_load) -> np.ndarray:
    return basis.psi.T @ np.asarray(fine_load, dtype=float)


def is_spd(mat: np.ndarray) -> bool:
    try:
        scipy.linalg.cho_factor(mat)
    except np.linalg.LinAlgError:
        return False
    return True


def save_basis(path, basis: CorrectorBasis) -> Path:
    """Binary corrector cache: header (H, h, k, coefficient hash) followed by the sparse columns of Q."""
    path = Path(path)
    Q = basis.Q
    with open(path, "wb") as fh:
        np.savez(
            fh,
            H=basis.H,
            h=basis.h,
            k=basis.k,
            coefficient_hash=np.array(basis.coefficient_hash),
            shape=np.array(Q.shape),
            indptr=Q.indptr,
            indices=Q.indices,
            data=Q.data,
        )
    return path


def load_basis(path, clement: ClementOperator, expect_hash: str | None = None, expect_k: int | None = None):
    """Load a cached basis, or return None if the header does not match."""
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path) as data:
        H, h, k = float(data["H"]), float(data["h"]), int(data["k"])
        chash = str(data["coefficient_hash"])
        Q = sp.csc_matrix((data["data"], data["indices"], data["indptr"]), shape=tuple(data["shape"]))
    hier = clement.hier
    if not (np.isclose(H, hier.H) and np.isclose(h, hier.h)):
        return None
    if expect_hash is not None and chash != expect_hash:
        return None
    if expect_k is not None and k != expect_k:
        return None
    return CorrectorBasis(k, clement.prolongation.tocsc(), Q, H, h, chash, {"loaded_from": str(path)})
