"""External forces on the ice, evaluated pointwise (edge midpoints).

Vectors are ``(N, 2)`` Cartesian arrays.  Force densities are in N/m^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .params import DEFAULT, PhysParams

VectorField = Callable[..., tuple]


def _norm(v):
    return np.hypot(v[..., 0], v[..., 1])


def cross_er(v):
    """``e_r x v`` for the vertical unit vector: (a, b) -> (-b, a)."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def wind_stress(v_a, params: PhysParams = DEFAULT):
    v_a = np.asarray(v_a, dtype=float)
    return params.rho_air * params.C_air * _norm(v_a)[..., None] * v_a


def ocean_drag_split(v_old, v_w, params: PhysParams = DEFAULT, linear_speed: Optional[float] = None):
    """Split ``rho_w C_w |v_w - v_old| (v_w - v_new)`` into ``explicit - c_d * v_new``.

    With ``linear_speed`` the drag is linearized about a fixed scaling speed.
    Returns ``(c_d * v_w, c_d)``.
    """
    v_w = np.asarray(v_w, dtype=float)
    if linear_speed is not None:
        speed = np.full(v_w.shape[:-1], float(linear_speed))
    else:
        speed = _norm(v_w - np.asarray(v_old, dtype=float))
    c_d = params.rho_water * params.C_water * speed
    return c_d[..., None] * v_w, c_d


def coriolis_tilt(v, v_w, h, params: PhysParams = DEFAULT):
    """Coriolis force with the ocean-tilt term: ``rho h f e_r x (v_w - v)``."""
    rel = np.asarray(v_w, dtype=float) - np.asarray(v, dtype=float)
    return (params.rho_ice * params.f_coriolis * np.asarray(h, dtype=float))[..., None] * cross_er(rel)


def manufactured_rhs(kind: str, x, y, zeta, Lx: float, Ly: float):
    """Right-hand side of the steady strain test, component-wise.

    ``full`` belongs to the symmetric stress, ``grad_only`` to the
    gradient-only stress.  The second component is the first with the roles
    of x and y exchanged (identical on a square).
    """
    px, py = np.pi / Lx, np.pi / Ly
    sx, sy = np.sin(px * x), np.sin(py * y)
    cc = np.cos(px * x) * np.cos(py * y)
    if kind == "grad_only":
        r = zeta * (px ** 2 + py ** 2) * sx * sy
        return r, r
    if kind == "full":
        r1 = 0.5 * zeta * (px ** 2 * sx * sy + 0.5 * py ** 2 * sx * sy - 0.5 * px * py * cc)
        r2 = 0.5 * zeta * (py ** 2 * sx * sy + 0.5 * px ** 2 * sx * sy - 0.5 * px * py * cc)
        return r1, r2
    raise ValueError(f"unknown manufactured rhs kind {kind!r}")


def _zero(x, y, t=0.0):
    z = np.zeros_like(np.asarray(x, dtype=float))
    return z, z


def _as_vectors(components, pts: np.ndarray) -> np.ndarray:
    fx, fy = components
    fx, fy, _ = np.broadcast_arrays(fx, fy, pts[:, 0])
    return np.stack([fx, fy], axis=1).astype(float)


@dataclass
class ForcingConfig:
    """Which forces act on the ice and the atmospheric/oceanic fields.

    ``wind(x, y, t)`` and ``ocean(x, y)`` return component tuples.
    """

    params: PhysParams = DEFAULT
    wind: VectorField = _zero
    ocean: VectorField = _zero
    use_wind: bool = True
    use_coriolis: bool = True
    use_drag: bool = True
    linear_drag: bool = False
    drag_speed: float = 0.1  # scaling speed |v_w - v|_0 for the linear drag, m/s

    def wind_at(self, pts: np.ndarray, t: float) -> np.ndarray:
        if not self.use_wind:
            return np.zeros_like(pts)
        return _as_vectors(self.wind(pts[:, 0], pts[:, 1], t), pts)

    def wind_stress_at(self, pts: np.ndarray, t: float) -> np.ndarray:
        return wind_stress(self.wind_at(pts, t), self.params)

    def ocean_at(self, pts: np.ndarray) -> np.ndarray:
        return _as_vectors(self.ocean(pts[:, 0], pts[:, 1]), pts)

    def drag(self, v_old, v_w):
        return ocean_drag_split(v_old, v_w, self.params, self.drag_speed if self.linear_drag else None)
