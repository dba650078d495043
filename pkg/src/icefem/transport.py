"""Donor-cell upwind advection of cell tracers with CR normal velocities."""

from __future__ import annotations

import warnings

import numpy as np

from .cr_space import VelocityField
from .mesh import Mesh


def _normal_velocity(V) -> np.ndarray:
    return V.normal if isinstance(V, VelocityField) else np.asarray(V, dtype=float)


def face_cfl(mesh: Mesh, V, k: float) -> float:
    vn = _normal_velocity(V)
    return float(np.max(np.abs(vn) * k * mesh.edge_length) / mesh.cell_area.min())


def upwind_step(mesh: Mesh, q: np.ndarray, V, k: float) -> np.ndarray:
    """Advance ``dq/dt + div(v q) = 0`` by one explicit upwind step.

    ``V`` is a :class:`VelocityField` or the per-edge normal components.
    Boundary edges carry no flux.
    """
    if k <= 0:
        raise ValueError("time step must be positive")
    vn = _normal_velocity(V)
    q = np.asarray(q, dtype=float)
    cfl = face_cfl(mesh, vn, k)
    if cfl > 1.0:
        warnings.warn(f"upwind step with face CFL {cfl:.3g} > 1", RuntimeWarning, stacklevel=2)

    e = mesh.interior_edges
    lo, hi = mesh.edge_cells[e, 0], mesh.edge_cells[e, 1]
    u = vn[e]
    # canonical normal points out of the lower cell
    donor = np.where(u > 0, q[lo], q[hi])
    flux = u * mesh.edge_length[e] * donor
    net = np.bincount(lo, weights=flux, minlength=mesh.n_cells) - np.bincount(hi, weights=flux, minlength=mesh.n_cells)
    return q - k / mesh.cell_area * net


def limit_tracers(h: np.ndarray, A: np.ndarray):
    return np.maximum(h, 0.0), np.clip(A, 0.0, 1.0)
