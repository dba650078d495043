"""Crouzeix-Raviart velocity space on a :class:`~icefem.mesh.Mesh`.

A discrete velocity is stored per edge as the coefficients ``(v_i, u_i)`` of
``v_h = sum_i (v_i n_i + u_i tau_i) phi_i``.  The basis function of edge
``i`` restricted to a cell is ``1 - 2 lambda``, with ``lambda`` the
barycentric coordinate of the opposite vertex, so its gradient on that cell
is ``2 n_out / h_i``.  Everything below is evaluated in closed form.

The solvers work on Cartesian midpoint values ``w_i = v_i n_i + u_i tau_i``
(shape ``(E, 2)``) through :class:`CROperators`; the frame change is a
per-edge rotation and commutes with every operator used here.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import Mesh


@dataclass
class VelocityField:
    normal: np.ndarray
    tangential: np.ndarray

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        self.tangential = np.asarray(self.tangential, dtype=float)
        if self.normal.shape != self.tangential.shape:
            raise ValueError("normal and tangential arrays differ in shape")

    @classmethod
    def zeros(cls, mesh: Mesh) -> "VelocityField":
        return cls(np.zeros(mesh.n_edges), np.zeros(mesh.n_edges))

    def __len__(self):
        return len(self.normal)

    def copy(self) -> "VelocityField":
        return VelocityField(self.normal.copy(), self.tangential.copy())

    def dot(self, other: "VelocityField") -> float:
        return float(self.normal @ other.normal + self.tangential @ other.tangential)

    def cartesian(self, mesh: Mesh) -> np.ndarray:
        return to_cartesian(mesh, self)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.normal)) and np.all(np.isfinite(self.tangential)))


def to_cartesian(mesh: Mesh, V: VelocityField) -> np.ndarray:
    return V.normal[:, None] * mesh.edge_normal + V.tangential[:, None] * mesh.edge_tangent


def from_cartesian(mesh: Mesh, w: np.ndarray) -> VelocityField:
    w = np.asarray(w, dtype=float)
    return VelocityField(np.einsum("ea,ea->e", w, mesh.edge_normal),
                         np.einsum("ea,ea->e", w, mesh.edge_tangent))


class CROperators:
    """Precomputed per-mesh kernels acting on Cartesian DOF arrays."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        # (C, 3, 2) gradient of each local basis function
        self.grad_phi = 2.0 * mesh.outward_normals() / mesh.cell_height[..., None]
        self.area = mesh.cell_area
        self.cell_edges = mesh.cell_edges
        self._flat_edges = mesh.cell_edges.ravel()
        self.n_edges = mesh.n_edges
        self.boundary = mesh.boundary_flag
        self.interior = ~mesh.boundary_flag
        # exact integral of phi_i (and of phi_i**2): the midpoint rule is exact for P2
        self.load_weight = np.bincount(self._flat_edges, weights=np.repeat(self.area / 3.0, 3),
                                       minlength=self.n_edges)
        # interleaved DOF ordering 2 * e + a; rows 4 * cell + 2 * a + b
        self._G = self._assemble_gradient(lambda a, e: 2 * e + a)
        self._GtA = (self._G.T @ sparse.diags(np.repeat(self.area, 4))).tocsr()

    def _assemble_gradient(self, col) -> sparse.csr_matrix:
        C, E = self.mesh.n_cells, self.n_edges
        rows, cols, vals = [], [], []
        k = np.arange(C)
        for i in range(3):
            e = self.cell_edges[:, i]
            for a in range(2):
                for b in range(2):
                    rows.append(4 * k + 2 * a + b)
                    cols.append(col(a, e))
                    vals.append(self.grad_phi[:, i, b])
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(4 * C, 2 * E))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        """(C, 2, 2) cell gradients ``grad v[a, b] = d v_a / d x_b``."""
        return (self._G @ np.ascontiguousarray(w).ravel()).reshape(-1, 2, 2)

    def strain_rate(self, w: np.ndarray) -> np.ndarray:
        g = self.gradient(w)
        return 0.5 * (g + g.transpose(0, 2, 1))

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Gather (C, 3, 2) per-cell contributions into (E, 2) in fixed order."""
        out = np.empty((self.n_edges, 2))
        for a in range(2):
            out[:, a] = np.bincount(self._flat_edges, weights=local[..., a].ravel(),
                                    minlength=self.n_edges)
        return out

    def stress_divergence(self, sigma: np.ndarray) -> np.ndarray:
        """Cartesian residual ``(sigma, grad phi)`` for a (C, 2, 2) cell stress."""
        return (self._GtA @ np.ascontiguousarray(sigma).ravel()).reshape(-1, 2)

    def cell_values(self, per_edge: np.ndarray) -> np.ndarray:
        """Cell average of an edge quantity (exact for CR fields)."""
        return per_edge[self.cell_edges].mean(axis=1)

    def gradient_matrix(self) -> sparse.csr_matrix:
        """Sparse map from DOFs ``[w_x; w_y]`` (length 2E) to cell gradients.

        Rows are ordered ``4 * cell + 2 * a + b`` for ``d v_a / d x_b``.
        """
        E = self.n_edges
        return self._assemble_gradient(lambda a, e: a * E + e)


_cache: "weakref.WeakKeyDictionary[Mesh, CROperators]" = weakref.WeakKeyDictionary()


def operators(mesh: Mesh) -> CROperators:
    ops = _cache.get(mesh)
    if ops is None:
        ops = _cache[mesh] = CROperators(mesh)
    return ops


def interpolate(mesh: Mesh, f) -> VelocityField:
    """Midpoint interpolant of a vector function ``f(x, y) -> (fx, fy)``."""
    x, y = mesh.edge_midpoint.T
    fx, fy = f(x, y)
    w = np.stack([np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape)], axis=1)
    return from_cartesian(mesh, w)


def cell_gradient(mesh: Mesh, V: VelocityField, cell: int | None = None) -> np.ndarray:
    g = operators(mesh).gradient(to_cartesian(mesh, V))
    return g if cell is None else g[cell]


def cell_strain_rate(mesh: Mesh, V: VelocityField, cell: int | None = None) -> np.ndarray:
    g = cell_gradient(mesh, V)
    eps = 0.5 * (g + g.transpose(0, 2, 1))
    return eps if cell is None else eps[cell]


def lumped_mass_diagonal(mesh: Mesh) -> np.ndarray:
    """Diagonal mass entry per edge: ``|K|/6`` from every adjacent cell."""
    return np.bincount(mesh.cell_edges.ravel(), weights=np.repeat(mesh.cell_area / 6.0, 3),
                       minlength=mesh.n_edges)


def apply_mass(mesh: Mesh, V: VelocityField) -> VelocityField:
    m = lumped_mass_diagonal(mesh)
    return VelocityField(m * V.normal, m * V.tangential)


def stress_divergence_residual(mesh: Mesh, S) -> VelocityField:
    """``(sigma, grad phi_j)`` summed over cells, split into (n, tau) parts."""
    sigma = S.tensor() if hasattr(S, "tensor") else np.asarray(S, dtype=float)
    return from_cartesian(mesh, operators(mesh).stress_divergence(sigma))


def apply_dirichlet(mesh: Mesh, V: VelocityField) -> VelocityField:
    out = V.copy()
    out.normal[mesh.boundary_flag] = 0.0
    out.tangential[mesh.boundary_flag] = 0.0
    return out
