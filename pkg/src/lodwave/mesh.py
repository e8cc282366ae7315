"""Structured two-level triangulations, red refinement and coarse element patches."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Domain2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate domain {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def side(self) -> float:
        """Side length of a square domain (x extent)."""
        return self.x_max - self.x_min


UNIT_SQUARE = Domain2D(0.0, 1.0, 0.0, 1.0)


def _on_boundary(points: np.ndarray, domain: Domain2D, tol: float = 1e-12) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    scale = max(domain.x_max - domain.x_min, domain.y_max - domain.y_min)
    t = tol * scale
    return (
        (np.abs(x - domain.x_min) < t)
        | (np.abs(x - domain.x_max) < t)
        | (np.abs(y - domain.y_min) < t)
        | (np.abs(y - domain.y_max) < t)
    )


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Conforming triangle mesh with Dirichlet node classification.

    ``interior_node_index[i]`` is the dense interior number of vertex ``i``,
    or -1 for boundary vertices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    domain: Domain2D

    interior_nodes: np.ndarray = field(init=False)
    interior_node_index: np.ndarray = field(init=False)

    def __post_init__(self):
        interior = np.flatnonzero(~self.boundary_flags)
        index = np.full(len(self.vertices), -1, dtype=np.int64)
        index[interior] = np.arange(len(interior))
        object.__setattr__(self, "interior_nodes", interior)
        object.__setattr__(self, "interior_node_index", index)
        for arr in (self.vertices, self.triangles, self.boundary_flags, interior, index):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_interior(self) -> int:
        return len(self.interior_nodes)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def node_valence(self) -> np.ndarray:
        """Number of triangles incident to each vertex."""
        return np.bincount(self.triangles.ravel(), minlength=self.n_vertices)

    def node_to_elements(self):
        """CSR-style incidence: elements touching vertex i are ``elems[ptr[i]:ptr[i+1]]``."""
        nodes = self.triangles.ravel()
        elems = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(nodes, kind="stable")
        ptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(nodes, minlength=self.n_vertices), out=ptr[1:])
        return ptr, elems[order]


def build_structured_mesh(domain: Domain2D, n_per_side: int) -> Triangulation:
    """Split an ``n x n`` grid of the rectangle into right triangles.

    Every square is cut along its lower-left to upper-right diagonal.
    Vertex ``(i, j)`` has index ``j * (n + 1) + i``.
    """
    n = int(n_per_side)
    if n < 1:
        raise ValueError("n_per_side must be >= 1")
    xs = np.linspace(domain.x_min, domain.x_max, n + 1)
    ys = np.linspace(domain.y_min, domain.y_max, n + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    boundary = ((ii == 0) | (ii == n) | (jj == 0) | (jj == n)).ravel()
    return Triangulation(vertices, triangles, boundary, domain)


def _red_refine(mesh: Triangulation):
    """One red refinement step; returns (fine mesh, children array of shape (n_tri, 4))."""
    tris = mesh.triangles
    nv = mesh.n_vertices
    # local edges: (0,1), (1,2), (2,0)
    edges = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    flat = np.sort(edges.reshape(-1, 2), axis=1)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1, 3)
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    m01 = nv + inverse[:, 0]
    m12 = nv + inverse[:, 1]
    m20 = nv + inverse[:, 2]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    children = np.stack(
        [
            np.column_stack([a, m01, m20]),
            np.column_stack([m01, b, m12]),
            np.column_stack([m20, m12, c]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    )
    fine_tris = children.reshape(-1, 3)
    child_index = np.arange(4 * len(tris)).reshape(-1, 4)

    mid_boundary = mesh.boundary_flags[uniq[:, 0]] & mesh.boundary_flags[uniq[:, 1]]
    # an edge joining two boundary vertices may still cut through the interior
    mid_boundary &= _on_boundary(mids, mesh.domain)
    boundary = np.concatenate([mesh.boundary_flags, mid_boundary])
    return Triangulation(vertices, fine_tris, boundary, mesh.domain), child_index


@dataclass(frozen=True, eq=False)
class MeshHierarchy:
    coarse: Triangulation
    fine: Triangulation
    refinement_levels: int
    coarse_to_fine_elements: np.ndarray
    coarse_node_embedding: np.ndarray

    fine_parent: np.ndarray = field(init=False)

    def __post_init__(self):
        parent = np.empty(self.fine.n_triangles, dtype=np.int64)
        parent[self.coarse_to_fine_elements] = np.arange(self.coarse.n_triangles)[:, None]
        parent.setflags(write=False)
        object.__setattr__(self, "fine_parent", parent)
        self.coarse_to_fine_elements.setflags(write=False)
        self.coarse_node_embedding.setflags(write=False)

    @property
    def H(self) -> float:
        """Coarse leg length."""
        t = self.coarse.triangles[0]
        return float(np.abs(self.coarse.vertices[t[1]] - self.coarse.vertices[t[0]]).max())

    @property
    def h(self) -> float:
        return self.H / 2**self.refinement_levels


def refine_hierarchy(coarse: Triangulation, levels: int) -> MeshHierarchy:
    """Red-refine ``coarse`` ``levels`` times and record parent/child maps."""
    if levels < 1:
        raise ValueError("refinement levels must be >= 1 so that h <= H/2")
    mesh = coarse
    c2f = np.arange(coarse.n_triangles)[:, None]
    for _ in range(levels):
        mesh, children = _red_refine(mesh)
        c2f = children[c2f].reshape(coarse.n_triangles, -1)
    # coarse vertices keep their indices through every refinement step
    embedding = np.arange(coarse.n_vertices, dtype=np.int64)
    return MeshHierarchy(coarse, mesh, levels, c2f, embedding)


def build_two_level(domain: Domain2D, H: float, h: float) -> MeshHierarchy:
    """Hierarchy with coarse leg length ``H`` and fine leg length ``h`` (both powers of 2 of the side)."""
    n = int(round(domain.side / H))
    levels = int(round(np.log2(H / h)))
    if not np.isclose(n * H, domain.side) or not np.isclose(2.0**levels * h, H):
        raise ValueError(f"H={H}, h={h} incompatible with domain {domain}")
    return refine_hierarchy(build_structured_mesh(domain, n), levels)


def vertex_permutation(src: Triangulation, dst: Triangulation) -> np.ndarray:
    """Index array ``p`` with ``dst.vertices[i] == src.vertices[p[i]]`` for geometrically equal meshes."""
    if src.n_vertices != dst.n_vertices:
        raise ValueError("meshes have different vertex counts")
    # dyadic grids: quantize far below the mesh size to absorb rounding noise
    scale = 2.0**-30 * max(np.ptp(src.vertices, axis=0))
    qs = np.round(src.vertices / scale).astype(np.int64)
    qd = np.round(dst.vertices / scale).astype(np.int64)
    order_s = np.lexsort((qs[:, 1], qs[:, 0]))
    order_d = np.lexsort((qd[:, 1], qd[:, 0]))
    if not np.array_equal(qs[order_s], qd[order_d]):
        raise ValueError("meshes do not share vertex coordinates")
    perm = np.empty(dst.n_vertices, dtype=np.int64)
    perm[order_d] = order_s
    return perm


@dataclass(frozen=True, eq=False)
class Patch:
    element: int
    k: int
    coarse_elements: np.ndarray
    fine_elements: np.ndarray
    fine_free_nodes: np.ndarray
    constrained_coarse_nodes: np.ndarray


class PatchBuilder:
    """Caches the incidence data needed to build many patches of one hierarchy."""

    def __init__(self, hier: MeshHierarchy):
        self.hier = hier
        self.coarse_ptr, self.coarse_elems = hier.coarse.node_to_elements()
        self.fine_valence = hier.fine.node_valence()

    def coarse_layers(self, K: int, k: int) -> np.ndarray:
        tris = self.hier.coarse.triangles
        elems = np.array([K], dtype=np.int64)
        for _ in range(k):
            nodes = np.unique(tris[elems])
            touching = [self.coarse_elems[self.coarse_ptr[z] : self.coarse_ptr[z + 1]] for z in nodes]
            grown = np.unique(np.concatenate(touching))
            if len(grown) == len(elems):
                break
            elems = grown
        return elems

    def __call__(self, K: int, k: int) -> Patch:
        if k < 0:
            raise ValueError("k must be >= 0")
        hier = self.hier
        if not 0 <= K < hier.coarse.n_triangles:
            raise IndexError(f"coarse element {K} out of range")
        coarse_elements = self.coarse_layers(K, k)
        fine_elements = np.sort(hier.coarse_to_fine_elements[coarse_elements].ravel())
        nodes = hier.fine.triangles[fine_elements].ravel()
        count = np.bincount(nodes, minlength=hier.fine.n_vertices)
        # free: every incident fine triangle lies in the patch, and not on the domain boundary
        free = np.flatnonzero((count > 0) & (count == self.fine_valence) & ~hier.fine.boundary_flags)
        cnodes = np.unique(hier.coarse.triangles[coarse_elements])
        constrained = cnodes[~hier.coarse.boundary_flags[cnodes]]
        return Patch(K, k, coarse_elements, fine_elements, free, constrained)


def build_patch(hier: MeshHierarchy, K: int, k: int) -> Patch:
    return PatchBuilder(hier)(K, k)


def write_vtk(path, mesh: Triangulation, point_data: dict | None = None, title: str = "lodwave") -> Path:
    """Legacy ASCII VTK unstructured grid with optional float64 point scalars."""
    path = Path(path)
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (nv,):
                raise ValueError(f"point data {name!r} has shape {values.shape}, expected ({nv},)")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{v:.17g}" for v in values]
    path.write_text("\n".join(lines) + "\n")
    return path
