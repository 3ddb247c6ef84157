"""P1 finite elements on a Friedrich-Keller triangulation of the unit square."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .sparse_linalg import CsrMatrix, as_csr, solve_spd, symmetrize

BOUNDARY = -1


@dataclass(frozen=True)
class TriMesh:
    """Structured triangulation with ``nx`` nodes per direction.

    ``interior_map[g]`` is the interior DOF index of global node ``g`` or
    ``BOUNDARY``; ``interior`` lists the global indices of interior nodes in
    DOF order.
    """

    nx: int
    h: float
    nodes: np.ndarray
    triangles: np.ndarray
    interior_map: np.ndarray
    interior: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.interior.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[self.interior]


def build_mesh(nx: int) -> TriMesh:
    """Split every grid cell along the diagonal from (x, y) to (x+h, y+h)."""
    if nx < 3:
        raise ValueError(f"nx must be at least 3 to have interior nodes, got {nx}")
    h = 1.0 / (nx - 1)
    coords = np.linspace(0.0, 1.0, nx)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    nodes = np.column_stack([xs.ravel(), ys.ravel()])  # node index = i + j * nx

    i, j = np.meshgrid(np.arange(nx - 1), np.arange(nx - 1), indexing="xy")
    a = (i + j * nx).ravel()
    b = a + 1
    c = a + nx + 1
    d = a + nx
    triangles = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    tol = 1e-12
    on_boundary = np.any((nodes < tol) | (nodes > 1.0 - tol), axis=1)
    interior = np.flatnonzero(~on_boundary)
    interior_map = np.full(nodes.shape[0], BOUNDARY, dtype=int)
    interior_map[interior] = np.arange(interior.size)
    return TriMesh(nx, h, nodes, triangles, interior_map, interior)


def signed_areas(mesh: TriMesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def assemble_full(mesh: TriMesh) -> tuple[CsrMatrix, CsrMatrix]:
    """Consistent mass and stiffness matrices on all nodes (no boundary elimination)."""
    p = mesh.nodes[mesh.triangles]  # (E, 3, 2)
    area = signed_areas(mesh)
    # gradients of the barycentric coordinates: rotate opposite edges by 90 degrees
    edges = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / (2.0 * area)[:, None, None]
    k_loc = area[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    m_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = area[:, None, None] * m_ref[None]

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    shape = (mesh.n_nodes, mesh.n_nodes)
    mass = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=shape)
    stiff = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=shape)
    return symmetrize(mass), symmetrize(stiff)


def assemble(mesh: TriMesh) -> tuple[CsrMatrix, CsrMatrix]:
    """Mass ``M`` and stiffness ``A`` (for -Laplace) on interior DOFs, Dirichlet rows/cols removed."""
    mass, stiff = assemble_full(mesh)
    idx = mesh.interior
    return as_csr(mass[idx][:, idx]), as_csr(stiff[idx][:, idx])


def interpolate_nodal(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], mesh: TriMesh) -> np.ndarray:
    """Evaluate ``fn(x1, x2)`` (vectorized) at the interior nodes."""
    pts = mesh.interior_nodes
    vals = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
    return np.broadcast_to(vals, (pts.shape[0],)).copy()


def poisson_nodal_error(nx: int) -> float:
    """Max nodal error of ``A u = M f`` for ``u = sin(pi x1) sin(pi x2)``, ``f = 2 pi^2 u``."""
    mesh = build_mesh(nx)
    mass, stiff = assemble(mesh)

    def exact(x1, x2):
        return np.sin(np.pi * x1) * np.sin(np.pi * x2)

    u_ref = interpolate_nodal(exact, mesh)
    u = solve_spd(stiff, mass @ (2.0 * np.pi**2 * u_ref))
    return float(np.max(np.abs(u - u_ref)))
