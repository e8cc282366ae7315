"""P1 assembly on the fine triangulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Triangulation
from .sparse import from_triplets, restrict

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def element_geometry(mesh: Triangulation):
    """Per-triangle areas and constant hat-function gradients, shape (nt,) and (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # rows of inv(J)^T give gradients of the barycentrics 1 and 2
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return 0.5 * det, grads


def local_stiffness(mesh: Triangulation) -> np.ndarray:
    """Unit-coefficient element stiffness matrices, shape (nt, 3, 3)."""
    area, grads = element_geometry(mesh)
    return area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)


def local_mass(mesh: Triangulation) -> np.ndarray:
    area, _ = element_geometry(mesh)
    return area[:, None, None] * _MASS_REF[None]


def _assemble(mesh: Triangulation, local: np.ndarray) -> sp.csr_matrix:
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_vertices
    return from_triplets(rows, cols, local.ravel(), (n, n))


@dataclass(frozen=True)
class CoefficientField:
    values: np.ndarray

    @property
    def alpha(self) -> float:
        return float(self.values.min())

    @property
    def beta(self) -> float:
        return float(self.values.max())


def sample_coefficient(coef, fine: Triangulation) -> CoefficientField:
    """Piecewise constant coefficient from barycenter values of a vectorized ``coef(x)``."""
    values = np.asarray(coef(fine.barycenters()), dtype=float)
    values = np.broadcast_to(values, (fine.n_triangles,)).copy()
    bad = np.flatnonzero(~(values > 0))
    if len(bad):
        T = bad[0]
        raise ValueError(f"coefficient not positive on element {T}: a={values[T]}")
    values.setflags(write=False)
    return CoefficientField(values)


def assemble_stiffness_full(fine: Triangulation, field: CoefficientField | None = None) -> sp.csr_matrix:
    local = local_stiffness(fine)
    if field is not None:
        if field.values.shape != (fine.n_triangles,):
            raise ValueError("coefficient field does not match the mesh")
        local = local * field.values[:, None, None]
    return _assemble(fine, local)


def assemble_mass_full(fine: Triangulation) -> sp.csr_matrix:
    return _assemble(fine, local_mass(fine))


def assemble_stiffness(fine: Triangulation, field: CoefficientField | None = None) -> sp.csr_matrix:
    """Stiffness matrix on interior nodes (homogeneous Dirichlet eliminated)."""
    return restrict(assemble_stiffness_full(fine, field), fine.interior_nodes)


def assemble_mass(fine: Triangulation) -> sp.csr_matrix:
    return restrict(assemble_mass_full(fine), fine.interior_nodes)


def assemble_load_full(fine: Triangulation, source, t: float = 0.0) -> np.ndarray:
    """One-point barycentric quadrature of ``(F(., t), lambda_i)`` for all vertices."""
    area, _ = element_geometry(fine)
    vals = np.broadcast_to(np.asarray(source(fine.barycenters(), t), dtype=float), (fine.n_triangles,))
    contrib = np.repeat((area * vals / 3.0)[:, None], 3, axis=1)
    return np.bincount(fine.triangles.ravel(), weights=contrib.ravel(), minlength=fine.n_vertices)


def assemble_load(fine: Triangulation, source, t: float = 0.0) -> np.ndarray:
    return assemble_load_full(fine, source, t)[fine.interior_nodes]


@dataclass(frozen=True, eq=False)
class FineOperators:
    """Fine-scale operators; ``*_full`` act on all vertices, the rest on interior ones."""

    mesh: Triangulation
    field: CoefficientField
    A_full: sp.csr_matrix
    A1_full: sp.csr_matrix
    M_full: sp.csr_matrix
    A_h: sp.csr_matrix
    A1_h: sp.csr_matrix
    M_h: sp.csr_matrix

    def load(self, source, t: float) -> np.ndarray:
        return assemble_load(self.mesh, source, t)

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolation of ``func(x)`` at the interior vertices."""
        pts = self.mesh.vertices[self.mesh.interior_nodes]
        return np.broadcast_to(np.asarray(func(pts), dtype=float), (len(pts),)).copy()


def build_fine_operators(fine: Triangulation, field: CoefficientField) -> FineOperators:
    A_full = assemble_stiffness_full(fine, field)
    A1_full = assemble_stiffness_full(fine)
    M_full = assemble_mass_full(fine)
    inner = fine.interior_nodes
    return FineOperators(
        fine, field, A_full, A1_full, M_full, restrict(A_full, inner), restrict(A1_full, inner), restrict(M_full, inner)
    )
