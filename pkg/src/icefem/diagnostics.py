"""Post-processing: weighted H1 energy, deformation, Korn/Poincare constants
and the a-priori bound terms of the VP and EVP momentum equations.

Norms of CR fields are exact: the midpoint rule integrates the squared
piecewise-linear field exactly, so ``||v||^2 = sum_e m_e |w_e|^2`` with the
exact lumped weights ``m_e = sum |K|/3``, and ``||grad v||^2`` is a sum of
cell-constant Frobenius norms times ``|K|``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import rheology as rh
from .cr_space import VelocityField, operators, to_cartesian
from .mesh import Mesh
from .params import DEFAULT, PhysParams
from .stabilization import stabilizer

log = logging.getLogger(__name__)


def _cartesian(mesh: Mesh, V) -> np.ndarray:
    return to_cartesian(mesh, V) if isinstance(V, VelocityField) else np.asarray(V, dtype=float)


def l2_norm_sq(mesh: Mesh, V) -> float:
    w = _cartesian(mesh, V)
    return float(operators(mesh).load_weight @ np.sum(w * w, axis=1))


def grad_norm_sq(mesh: Mesh, V) -> float:
    """``sum_K |K| |grad v|_F^2`` (broken H1 seminorm squared)."""
    g = operators(mesh).gradient(_cartesian(mesh, V))
    return float(mesh.cell_area @ np.sum(g * g, axis=(1, 2)))


def strain_norm_sq(mesh: Mesh, V) -> float:
    eps = operators(mesh).strain_rate(_cartesian(mesh, V))
    return float(mesh.cell_area @ np.sum(eps * eps, axis=(1, 2)))


@dataclass
class EnergyTrace:
    """Time series of the weighted gradient ``E(v) = int zeta_min ||grad v||^2 dt``.

    Row ``n`` holds the state at ``t[n]``; ``E[n]`` integrates up to ``t[n]``
    with left-endpoint rectangles, so ``E[0] = 0``.
    """

    t: np.ndarray
    grad_norm_sq: np.ndarray
    zeta_min: float
    increment: np.ndarray = field(init=False)
    E: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.grad_norm_sq = np.asarray(self.grad_norm_sq, dtype=float)
        if self.t.shape != self.grad_norm_sq.shape:
            raise ValueError("t and grad_norm_sq differ in length")
        dt = np.diff(self.t)
        self.increment = self.zeta_min * dt * self.grad_norm_sq[:-1]
        self.E = np.concatenate([[0.0], np.cumsum(self.increment)])

    @property
    def final(self) -> float:
        return float(self.E[-1]) if len(self.E) else 0.0

    def rows(self):
        for n in range(len(self.t)):
            yield self.t[n], self.grad_norm_sq[n], self.E[n]


def weighted_h1(mesh: Mesh, velocities: Sequence, zeta_min: float, k: float, t0: float = 0.0) -> EnergyTrace:
    """Energy trace of equally spaced states ``velocities[n]`` at ``t0 + n k``."""
    if zeta_min < 0:
        raise ValueError("zeta_min must be nonnegative")
    g = np.array([grad_norm_sq(mesh, V) for V in velocities])
    return EnergyTrace(t=t0 + k * np.arange(len(g)), grad_norm_sq=g, zeta_min=float(zeta_min))


def total_deformation(mesh: Mesh, V, params: PhysParams = DEFAULT) -> np.ndarray:
    return rh.delta(operators(mesh).strain_rate(_cartesian(mesh, V)), params)


def velocity_jump_metric(mesh: Mesh, V, reduce: str = "max") -> float:
    """Size of the velocity jumps ``[v_h]`` across interior edges.

    Along an edge the jump is ``(1 - 2t) D_e``, so its largest value is
    ``|D_e|`` at the edge endpoints.  ``reduce="max"`` returns the largest
    ``|D_e|``, ``"rms"`` the root mean square over interior edges.
    """
    D = stabilizer(mesh).jumps(_cartesian(mesh, V))
    size = np.hypot(D[:, 0], D[:, 1])
    if reduce == "max":
        return float(np.max(size, initial=0.0))
    if reduce == "rms":
        return float(np.sqrt(np.mean(size ** 2))) if size.size else 0.0
    raise ValueError(f"unknown reduction {reduce!r}")


# ---------------------------------------------------------------------------
# quadratic forms on the constrained CR space
# ---------------------------------------------------------------------------

def _interior_dofs(mesh: Mesh) -> np.ndarray:
    inner = np.flatnonzero(~mesh.boundary_flag)
    return np.sort(np.concatenate([2 * inner, 2 * inner + 1]))


def _sym_projector(n_cells: int) -> sparse.csr_matrix:
    # (C*4) gradient rows -> symmetric part, same layout
    blk = np.array([[1, 0, 0, 0], [0, .5, .5, 0], [0, .5, .5, 0], [0, 0, 0, 1]])
    return sparse.kron(sparse.identity(n_cells), sparse.csr_matrix(blk), format="csr")


def quadratic_forms(mesh: Mesh, stabilized: bool = False):
    """``(A, B)`` on interior DOFs: ``A`` the strain form (plus unit-weight
    jump penalty if ``stabilized``), ``B`` the gradient form.

    Interleaved DOF layout ``2 e + a`` restricted to interior edges.
    """
    ops = operators(mesh)
    W = sparse.diags(np.repeat(mesh.cell_area, 4))
    G = ops._G
    Gs = _sym_projector(mesh.n_cells) @ G
    A = Gs.T @ W @ Gs
    if stabilized:
        st = stabilizer(mesh)
        w = np.repeat(st.weights(np.ones(mesh.n_edges), 1.0), 2)
        A = A + st._J2.T @ sparse.diags(w) @ st._J2
    B = G.T @ W @ G
    keep = _interior_dofs(mesh)
    return A.tocsr()[keep][:, keep].tocsc(), B.tocsr()[keep][:, keep].tocsc()


def mass_form(mesh: Mesh) -> sparse.csc_matrix:
    m = np.repeat(operators(mesh).load_weight, 2)
    keep = _interior_dofs(mesh)
    return sparse.diags(m[keep]).tocsc()


class NotConverged(RuntimeError):
    pass


def smallest_eigenpair(A, B, shift: float = -1e-6, tol: float = 1e-8, maxiter: int = 10_000,
                       seed: int = 0):
    """Smallest ``lambda`` of ``A x = lambda B x`` by shifted inverse iteration.

    ``B`` must be SPD.  The shift is relative to the diagonal scale
    ``mean(diag A) / mean(diag B)`` so it stays meaningful in any units.
    Converged when the Rayleigh quotient changes by less than ``tol``
    relatively.
    """
    scale = float(A.diagonal().mean() / B.diagonal().mean())
    lu = spla.splu(sparse.csc_matrix(A - shift * scale * B))
    x = np.random.default_rng(seed).standard_normal(A.shape[0])
    x /= np.sqrt(x @ (B @ x))
    lam = float(x @ (A @ x))
    for it in range(1, maxiter + 1):
        y = lu.solve(B @ x)
        x = y / np.sqrt(y @ (B @ y))
        new = float(x @ (A @ x))
        if abs(new - lam) <= tol * abs(new):
            log.debug("inverse iteration converged in %d steps, lambda=%.6g", it, new)
            return new, x
        lam = new
    raise NotConverged(f"inverse iteration did not converge in {maxiter} iterations (lambda={lam:.6g})")


@dataclass
class KornEstimate:
    value: float
    mode: np.ndarray  # (E, 2) Cartesian minimizing field, zero on the boundary
    stabilized: bool


def _full_field(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    out = np.zeros(2 * mesh.n_edges)
    out[_interior_dofs(mesh)] = x
    return out.reshape(-1, 2)


def estimate_korn_constant(mesh: Mesh, stabilized: bool = False, **kw) -> KornEstimate:
    """Smallest ratio ``(||eps(v)||^2 [+ jump energy]) / ||grad v||^2`` over CR
    fields vanishing on the boundary."""
    A, B = quadratic_forms(mesh, stabilized)
    lam, x = smallest_eigenpair(A, B, **kw)
    return KornEstimate(value=lam, mode=_full_field(mesh, x), stabilized=stabilized)


def estimate_poincare_constant(mesh: Mesh, **kw) -> float:
    """``c_p`` with ``||v||^2 <= c_p ||grad v||^2`` on the constrained space (m^2)."""
    _, B = quadratic_forms(mesh)
    lam, _ = smallest_eigenpair(B, mass_form(mesh), **kw)
    return 1.0 / lam


# ---------------------------------------------------------------------------
# bound report
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """What the bound report needs from a run with constant ``h`` and ``A``.

    ``velocities`` and ``R`` are ``(N+1, E, 2)`` midpoint values at
    ``t = t0 + n k``; ``R`` is the velocity-independent data
    ``tau_a + rho_w C_w1 v_w + rho h f e_r x v_w``.
    """

    k: float
    velocities: np.ndarray
    R: np.ndarray
    zeta_min: float
    zeta0: np.ndarray  # cell viscosities at t0
    rho_h: float
    drag_coef: float  # rho_w C_w1, N s / m^3
    T_evp: float = 100.0
    linear_drag: bool = True
    advection: bool = False


@dataclass
class BoundReport:
    c_k: float
    c_p: float
    gamma: float
    gamma2: float
    gamma0: float
    terms: dict
    vp_lhs: float
    vp_rhs: float
    evp_lhs: float
    evp_rhs: float
    notes: list = field(default_factory=list)

    @staticmethod
    def _ratio(lhs, rhs):
        if lhs == 0.0:
            return 0.0
        return lhs / rhs if rhs > 0 else float("inf")

    @property
    def vp_ratio(self) -> float:
        return self._ratio(self.vp_lhs, self.vp_rhs)

    @property
    def evp_ratio(self) -> float:
        return self._ratio(self.evp_lhs, self.evp_rhs)

    def rows(self):
        yield from self.terms.items()
        yield from (("vp_lhs", self.vp_lhs), ("vp_rhs", self.vp_rhs), ("vp_ratio", self.vp_ratio),
                    ("evp_lhs", self.evp_lhs), ("evp_rhs", self.evp_rhs), ("evp_ratio", self.evp_ratio))


def theorem_bound_report(mesh: Mesh, rec: RunRecord, c_k: float, c_p: float,
                         gamma: Optional[float] = None, gamma2: Optional[float] = None) -> BoundReport:
    """Evaluate both sides of the VP and EVP energy estimates on a recorded run.

    Time integrals use left-endpoint rectangles over ``[t0, t0 + N k]``.
    """
    if not rec.linear_drag or rec.advection:
        raise ValueError("bound report needs linear drag and frozen h, A (no advection)")
    if c_k <= 0 or c_p <= 0:
        raise ValueError("c_k and c_p must be positive")
    V = np.asarray(rec.velocities, dtype=float)
    R = np.asarray(rec.R, dtype=float)
    if V.ndim != 3 or V.shape != R.shape or len(V) < 2:
        raise ValueError("velocities and R must be (N+1, E, 2) with N >= 1")
    k, T, cw, rh_ = rec.k, rec.T_evp, rec.drag_coef, rec.rho_h
    gamma = T / 2.0 if gamma is None else gamma
    gamma2 = cw if gamma2 is None else gamma2
    zmin = rec.zeta_min

    v2 = np.array([l2_norm_sq(mesh, v) for v in V])
    g2 = np.array([grad_norm_sq(mesh, v) for v in V])
    R2 = np.array([l2_norm_sq(mesh, r) for r in R])
    dv = np.diff(V, axis=0) / k
    dv2 = np.array([l2_norm_sq(mesh, d) for d in dv])
    dR = np.gradient(R, k, axis=0)
    RR2 = np.array([l2_norm_sq(mesh, d + r) for d, r in zip(dR, R)])
    eps0 = operators(mesh).strain_rate(V[0])
    strain0 = float(np.sum(mesh.cell_area * np.asarray(rec.zeta0) * np.sum(eps0 * eps0, axis=(1, 2)))) / 4.0

    def integral(f):
        return k * float(np.sum(f[:-1]))

    gamma0 = c_k * zmin / (c_p * T) if zmin > 0 else 0.0
    a = rh_ * T / 4.0 + rh_ / (2.0 * gamma)
    b = cw + rh_ / T + gamma * rh_ / 2.0
    c = (1.0 / (2.0 * gamma0) if gamma0 > 0 else float("inf")) + T / (4.0 * gamma2)
    vp_data = c_p / (c_k * zmin) if zmin > 0 else float("inf")

    terms = {
        "E_of_v": zmin * integral(g2),
        "int_R_sq": integral(R2),
        "int_dtR_plus_R_sq": integral(RR2),
        "rho_h_v0_sq": rh_ ** 2 * v2[0],
        "rho_h_vT_sq": rh_ ** 2 * v2[-1],
        "int_v_sq": integral(v2),
        "int_dtv_sq": k * float(np.sum(dv2)),
        "zeta_eps0_sq_over_4": strain0,
        "dtv0_sq": float(dv2[0]),
        "v0_sq": float(v2[0]),
        "vT_sq": float(v2[-1]),
        "grad_vT_sq": float(g2[-1]),
        "a": a, "b": b, "c": c,
    }
    # the data terms vanish identically when R = 0; avoid inf * 0
    vp_rhs = (vp_data * terms["int_R_sq"] if terms["int_R_sq"] > 0 else 0.0) + terms["rho_h_v0_sq"]
    vp_lhs = (terms["rho_h_vT_sq"] + 0.5 * cw * terms["int_v_sq"]
              + c_k * zmin / 4.0 * integral(g2))
    evp_rhs = (strain0 + a * terms["dtv0_sq"] + b * terms["v0_sq"]
               + (c * terms["int_dtR_plus_R_sq"] if terms["int_dtR_plus_R_sq"] > 0 else 0.0))
    evp_lhs = (cw * terms["vT_sq"] + c_k * zmin / 4.0 * terms["grad_vT_sq"]
               + 2.0 / T * cw * terms["int_v_sq"] + c_k * zmin / (2.0 * T) * integral(g2)
               + T / 4.0 * cw * terms["int_dtv_sq"])
    notes = ["EVP estimate assumes tr(sigma) = 0, which the EVP closure does not enforce"]
    return BoundReport(c_k=c_k, c_p=c_p, gamma=gamma, gamma2=gamma2, gamma0=gamma0, terms=terms,
                       vp_lhs=vp_lhs, vp_rhs=vp_rhs, evp_lhs=evp_lhs, evp_rhs=evp_rhs, notes=notes)
