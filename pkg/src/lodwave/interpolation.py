"""Weighted Clement quasi-interpolation and the kernel constraints it induces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_mass_full
from .mesh import MeshHierarchy, Patch
from .sparse import restrict


def coarse_barycentrics(hier: MeshHierarchy, K: int, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of ``points`` with respect to coarse triangle ``K``."""
    p = hier.coarse.vertices[hier.coarse.triangles[K]]
    T = np.column_stack([p[1] - p[0], p[2] - p[0]])
    lam12 = np.linalg.solve(T, (points - p[0]).T).T
    return np.column_stack([1.0 - lam12.sum(axis=1), lam12])


def prolongation_full(hier: MeshHierarchy) -> sp.csr_matrix:
    """Fine nodal values of every coarse hat, shape (n_fine_vertices, n_coarse_vertices)."""
    fine, coarse = hier.fine, hier.coarse
    rows, cols, vals = [], [], []
    for K in range(coarse.n_triangles):
        nodes = np.unique(fine.triangles[hier.coarse_to_fine_elements[K]])
        lam = coarse_barycentrics(hier, K, fine.vertices[nodes])
        # dyadic refinement points: snap rounding noise so shared nodes agree exactly
        lam = np.round(lam * 2**40) / 2**40
        for local, z in enumerate(coarse.triangles[K]):
            nz = lam[:, local] != 0.0
            rows.append(nodes[nz])
            cols.append(np.full(nz.sum(), z))
            vals.append(lam[nz, local])
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    key = rows * coarse.n_vertices + cols
    _, first = np.unique(key, return_index=True)
    P = sp.csr_matrix((vals[first], (rows[first], cols[first])), shape=(fine.n_vertices, coarse.n_vertices))
    P.sort_indices()
    return P


@dataclass(frozen=True, eq=False)
class ClementOperator:
    """``mixed_mass[z, x] = (lambda_x, Phi_z)`` for interior coarse z and interior fine x."""

    hier: MeshHierarchy
    mixed_mass: sp.csr_matrix
    mixed_mass_full: sp.csr_matrix
    weights: np.ndarray
    prolongation: sp.csr_matrix

    @property
    def n_coarse(self) -> int:
        return self.mixed_mass.shape[0]

    def embed(self, coarse_coeffs) -> np.ndarray:
        """Coarse interior coefficients to fine interior nodal values."""
        return self.prolongation @ np.asarray(coarse_coeffs, dtype=float)


def build_clement(hier: MeshHierarchy) -> ClementOperator:
    P_full = prolongation_full(hier)
    M_full = assemble_mass_full(hier.fine)
    cin = hier.coarse.interior_nodes
    fin = hier.fine.interior_nodes
    mixed_full = (P_full[:, cin].T @ M_full).tocsr()
    mixed_full.sort_indices()
    weights = np.asarray(mixed_full.sum(axis=1)).ravel()
    mixed = restrict(mixed_full, np.arange(len(cin)), fin)
    prolong = restrict(P_full, fin, cin)
    return ClementOperator(hier, mixed, mixed_full, weights, prolong)


def apply_IH(op: ClementOperator, v_fine) -> np.ndarray:
    """Clement coefficients ``(v, Phi_z) / (1, Phi_z)``.

    ``v_fine`` may be given on interior fine nodes or on all fine vertices.
    """
    v = np.asarray(v_fine, dtype=float)
    if v.shape == (op.mixed_mass.shape[1],):
        return (op.mixed_mass @ v) / op.weights
    if v.shape == (op.mixed_mass_full.shape[1],):
        return (op.mixed_mass_full @ v) / op.weights
    raise ValueError(f"vector of shape {v.shape} matches neither fine interior nor full numbering")


def constraint_matrix(op: ClementOperator, patch: Patch) -> sp.csr_matrix:
    """Rows: constrained coarse nodes of the patch (zero rows dropped); columns: patch free nodes."""
    coarse_index = op.hier.coarse.interior_node_index[patch.constrained_coarse_nodes]
    C = op.mixed_mass_full[coarse_index][:, patch.fine_free_nodes].tocsr()
    C.eliminate_zeros()
    C = C[np.flatnonzero(np.diff(C.indptr) > 0)]
    C.sort_indices()
    return C
