"""Time integration of the sea-ice momentum equation on the CR space.

Weak form per DOF (Cartesian midpoint values ``w``, lumped weights):

    M_rho dw/dt = M (tau_a + drag) + M_rho f e_r x (v_w - w) - (sigma, grad phi) - S w

``M`` is the exact integral of the basis functions (``sum |K|/3``) and
``M_rho`` the same with ``rho h`` folded in.  The drag is semi-implicit, the
Coriolis term explicit.  Dirichlet DOFs are zeroed after every update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import rheology as rh
from .cr_space import VelocityField, from_cartesian, operators, to_cartesian
from .forcing import ForcingConfig, cross_er
from .mesh import Mesh
from .rheology import RheologyFields, StressField
from .stabilization import edge_viscosity, stabilizer

log = logging.getLogger(__name__)

DIVERGENCE_SPEED = 1e3  # m/s


class SolverDiverged(RuntimeError):
    def __init__(self, message: str, step: Optional[int] = None, t: Optional[float] = None):
        super().__init__(message)
        self.step = step
        self.t = t


@dataclass
class SolverConfig:
    k: float = 600.0
    n_sub: int = 500
    T_evp: float = 100.0
    alpha_mevp: float = 500.0
    beta_mevp: float = 500.0
    stabilize: bool = True
    alpha_stab: float = 1.0

    def __post_init__(self):
        if self.k <= 0 or self.n_sub < 1:
            raise ValueError("k and n_sub must be positive")

    @property
    def k_s(self) -> float:
        return self.k / self.n_sub


@dataclass
class SimState:
    t: float
    V: VelocityField
    S: StressField
    h: np.ndarray
    A: np.ndarray
    rheo: Optional[RheologyFields] = None
    pseudo_residual: float = float("nan")
    step: int = 0

    @classmethod
    def at_rest(cls, mesh: Mesh, h, A, t: float = 0.0) -> "SimState":
        h = np.broadcast_to(np.asarray(h, dtype=float), (mesh.n_cells,)).copy()
        A = np.broadcast_to(np.asarray(A, dtype=float), (mesh.n_cells,)).copy()
        return cls(t=t, V=VelocityField.zeros(mesh), S=StressField.zeros(mesh.n_cells), h=h, A=A)


@dataclass
class Model:
    """Mesh, forcing and stress law; owns the precomputed kernels.

    ``stress_law`` is ``"vp"`` (the viscous-plastic closure) or one of the
    linear viscous laws of the strain test, ``"viscous_sym"``
    (``c zeta eps``) and ``"viscous_grad"`` (``c zeta grad v``), with
    ``zeta = P / (2 delta_min)`` and ``c = viscous_factor``.
    """

    mesh: Mesh
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    stress_law: str = "vp"
    viscous_factor: float = 1.0
    unit_inertia: bool = False
    body_force: Optional[Callable] = None  # (x, y) -> (fx, fy), time-independent force density
    min_mass_thickness: float = 0.01  # m, floor for the inertia only

    def __post_init__(self):
        if self.stress_law not in ("vp", "viscous_sym", "viscous_grad"):
            raise ValueError(f"unknown stress law {self.stress_law!r}")
        self.ops = operators(self.mesh)
        self.stab = stabilizer(self.mesh)
        self.weight = self.ops.load_weight
        self.interior = self.ops.interior
        self.pts = self.mesh.edge_midpoint
        self.v_w = self.forcing.ocean_at(self.pts)
        self._body = None
        if self.body_force is not None:
            fx, fy = self.body_force(self.pts[:, 0], self.pts[:, 1])
            self._body = self.weight[:, None] * np.stack(np.broadcast_arrays(fx, fy), axis=1)
        self._zero_load = np.zeros((self.mesh.n_edges, 2))
        self._weights_for = (None, None, None)

    @property
    def params(self):
        return self.forcing.params

    def _mass_weights(self, h: np.ndarray):
        # the thickness array is shared between momentum steps, so cache on identity
        cached_h, m_inertia, m_coriolis = self._weights_for
        if cached_h is not h:
            def lump(rho_h):
                return np.bincount(self.mesh.cell_edges.ravel(),
                                   weights=np.repeat(rho_h * self.mesh.cell_area / 3.0, 3),
                                   minlength=self.mesh.n_edges)
            rho = self.params.rho_ice
            m_inertia = self.weight if self.unit_inertia else lump(rho * np.maximum(h, self.min_mass_thickness))
            m_coriolis = lump(rho * np.maximum(h, 0.0))
            self._weights_for = (h, m_inertia, m_coriolis)
        return m_inertia, m_coriolis

    def inertia_weight(self, h: np.ndarray) -> np.ndarray:
        return self._mass_weights(h)[0]

    def coriolis_weight(self, h: np.ndarray) -> np.ndarray:
        return self._mass_weights(h)[1]

    def explicit_load(self, t: float) -> np.ndarray:
        """Velocity-independent loads except the drag: wind and body force."""
        f = self._zero_load
        if self.forcing.use_wind:
            f = self.weight[:, None] * self.forcing.wind_stress_at(self.pts, t)
        if self._body is not None:
            f = f + self._body
        return f

    def rheology(self, w: np.ndarray, h: np.ndarray, A: np.ndarray) -> RheologyFields:
        eps = self.ops.strain_rate(w)
        if self.stress_law == "vp":
            fields = rh.rheology_fields(eps, h, A, self.params)
        else:
            P = rh.ice_strength(h, A, self.params)
            zeta = P / (2.0 * self.params.delta_min)
            fields = RheologyFields(P=P, delta=np.full_like(P, self.params.delta_min), zeta=zeta,
                                    eta=zeta / self.params.e ** 2)
        fields.eps = eps
        return fields

    def stress(self, w: np.ndarray, fields: RheologyFields) -> np.ndarray:
        c = self.viscous_factor
        if self.stress_law == "vp":
            return rh.vp_stress(fields.eps, fields.zeta, fields.eta, fields.P)
        if self.stress_law == "viscous_sym":
            return (c * fields.zeta)[:, None, None] * fields.eps
        return (c * fields.zeta)[:, None, None] * self.ops.gradient(w)

    def stabilization(self, w: np.ndarray, zeta_cell: np.ndarray, cfg: SolverConfig):
        """Jump penalty split as ``R w_new - (R - S) w``; returns ``((R - S) w, R)``.

        ``R`` bounds ``S`` from above, so the lagged remainder cannot amplify
        jump modes whatever the step size; fixed points are unaffected.
        """
        if not cfg.stabilize:
            return 0.0, 0.0
        zeta_e = edge_viscosity(self.mesh, zeta_cell)
        R = self.stab.diagonal_bound(zeta_e, cfg.alpha_stab)
        return R[:, None] * w - self.stab.apply(w, zeta_e, cfg.alpha_stab), R

    def drag(self, w_old: np.ndarray):
        if not self.forcing.use_drag:
            return 0.0, np.zeros(self.mesh.n_edges)
        explicit, c_d = self.forcing.drag(w_old, self.v_w)
        return self.weight[:, None] * explicit, self.weight * c_d

    def coriolis(self, w: np.ndarray, h: np.ndarray) -> np.ndarray:
        if not self.forcing.use_coriolis:
            return 0.0
        return (self.params.f_coriolis * self.coriolis_weight(h))[:, None] * cross_er(self.v_w - w)

    def apply_bc(self, w: np.ndarray) -> np.ndarray:
        w[self.mesh.boundary_flag] = 0.0
        return w


def _check(w: np.ndarray, state: SimState, what: str):
    if not np.all(np.isfinite(w)) or np.abs(w).max(initial=0.0) > DIVERGENCE_SPEED:
        raise SolverDiverged(f"{what} diverged at step {state.step + 1} (t={state.t:.6g} s)",
                             step=state.step + 1, t=state.t)


def _finish(model: Model, state: SimState, w: np.ndarray, S: StressField, cfg: SolverConfig,
            fields: RheologyFields, pseudo: float = float("nan")) -> SimState:
    return replace(state, t=state.t + cfg.k, V=from_cartesian(model.mesh, w), S=S, rheo=fields,
                   pseudo_residual=pseudo, step=state.step + 1)


def step_vp(model: Model, state: SimState, cfg: SolverConfig) -> SimState:
    """One forward-Euler step with explicit stress and semi-implicit drag."""
    k = cfg.k
    w0 = to_cartesian(model.mesh, state.V)
    fields = model.rheology(w0, state.h, state.A)
    sigma = model.stress(w0, fields)
    m_rho = model.inertia_weight(state.h)
    drag_expl, c_d = model.drag(w0)
    rhs = (m_rho / k)[:, None] * w0 + model.explicit_load(state.t) + drag_expl + model.coriolis(w0, state.h)
    stab, R = model.stabilization(w0, fields.zeta, cfg)
    rhs = rhs - model.ops.stress_divergence(sigma) + stab
    w = model.apply_bc(rhs / (m_rho / k + c_d + R)[:, None])
    _check(w, state, "VP step")
    return _finish(model, state, w, StressField.from_tensor(sigma), cfg, fields)


def step_evp(model: Model, state: SimState, cfg: SolverConfig) -> SimState:
    """``n_sub`` EVP subcycles of length ``k/n_sub``."""
    k_s = cfg.k_s
    w = to_cartesian(model.mesh, state.V)
    S = state.S
    m_rho = model.inertia_weight(state.h)
    load = model.explicit_load(state.t)
    for _ in range(cfg.n_sub):
        fields = model.rheology(w, state.h, state.A)
        S = rh.evp_stress_step(S, fields.eps, fields.zeta, fields.P, k_s, cfg.T_evp)
        drag_expl, c_d = model.drag(w)
        rhs = (m_rho / k_s)[:, None] * w + load + drag_expl + model.coriolis(w, state.h)
        stab, R = model.stabilization(w, fields.zeta, cfg)
        rhs = rhs - model.ops.stress_divergence(S.tensor()) + stab
        w = model.apply_bc(rhs / (m_rho / k_s + c_d + R)[:, None])
    _check(w, state, "EVP subcycling")
    return _finish(model, state, w, S, cfg, model.rheology(w, state.h, state.A))


def solve_mevp(model: Model, state: SimState, cfg: SolverConfig) -> SimState:
    """``n_sub`` mEVP pseudo-iterations towards the backward-Euler VP step of size ``k``."""
    k, alpha, beta = cfg.k, cfg.alpha_mevp, cfg.beta_mevp
    if alpha < 1 or beta < 1:
        raise ValueError("alpha and beta must be >= 1")
    w_n = to_cartesian(model.mesh, state.V)
    w = w_n.copy()
    S = state.S
    m_rho = model.inertia_weight(state.h)
    a = m_rho / k
    load = model.explicit_load(state.t) + a[:, None] * w_n
    pseudo = float("nan")
    for _ in range(cfg.n_sub):
        fields = model.rheology(w, state.h, state.A)
        S = rh.mevp_stress_step(S, fields.eps, fields.zeta, fields.P, alpha)
        drag_expl, c_d = model.drag(w)
        rhs = (beta * a)[:, None] * w + load + drag_expl + model.coriolis(w, state.h)
        stab, R = model.stabilization(w, fields.zeta, cfg)
        rhs = rhs - model.ops.stress_divergence(S.tensor()) + stab
        w_new = model.apply_bc(rhs / ((beta + 1.0) * a + c_d + R)[:, None])
        pseudo = float(np.linalg.norm(w_new - w) / max(np.linalg.norm(w_new), 1e-300))
        w = w_new
    _check(w, state, "mEVP")
    return _finish(model, state, w, S, cfg, model.rheology(w, state.h, state.A), pseudo)


STEPPERS = {"vp": step_vp, "evp": step_evp, "mevp": solve_mevp}
