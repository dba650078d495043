"""Constitutive closures of the viscous-plastic family.

All functions are vectorized over cells.  Strain rates and stresses are
``(..., 2, 2)`` arrays; the EVP/mEVP updates work on the rotated components
``sigma_1 = s11 + s22``, ``sigma_2 = s11 - s22`` and ``s12``.  The
eccentricity is fixed to ``e = 2`` in the stress updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import DEFAULT, PhysParams


@dataclass
class StressField:
    """Per-cell symmetric stress stored as (s11, s12, s22), N/m."""

    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray

    @classmethod
    def zeros(cls, n_cells: int) -> "StressField":
        return cls(np.zeros(n_cells), np.zeros(n_cells), np.zeros(n_cells))

    @classmethod
    def from_tensor(cls, sigma: np.ndarray) -> "StressField":
        sigma = np.asarray(sigma, dtype=float)
        return cls(sigma[..., 0, 0].copy(), 0.5 * (sigma[..., 0, 1] + sigma[..., 1, 0]),
                   sigma[..., 1, 1].copy())

    @classmethod
    def from_rotated(cls, sigma1, sigma2, sigma12) -> "StressField":
        return cls(0.5 * (sigma1 + sigma2), np.asarray(sigma12, dtype=float).copy(),
                   0.5 * (sigma1 - sigma2))

    @property
    def sigma1(self) -> np.ndarray:
        return self.s11 + self.s22

    @property
    def sigma2(self) -> np.ndarray:
        return self.s11 - self.s22

    def tensor(self) -> np.ndarray:
        out = np.empty(np.shape(self.s11) + (2, 2))
        out[..., 0, 0] = self.s11
        out[..., 0, 1] = out[..., 1, 0] = self.s12
        out[..., 1, 1] = self.s22
        return out

    def copy(self) -> "StressField":
        return StressField(self.s11.copy(), self.s12.copy(), self.s22.copy())


@dataclass
class RheologyFields:
    P: np.ndarray
    delta: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    eps: Optional[np.ndarray] = None  # strain rate the fields were evaluated at


def ice_strength(h, A, params: PhysParams = DEFAULT):
    return params.P_star * np.asarray(h, dtype=float) * np.exp(-params.C_conc * (1.0 - np.asarray(A, dtype=float)))


def delta(eps, params: PhysParams = DEFAULT):
    """Regularized deformation ``sqrt(dmin^2 + 2 e^-2 eps':eps' + tr(eps)^2)``."""
    eps = np.asarray(eps, dtype=float)
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    d11 = eps[..., 0, 0] - 0.5 * tr
    d22 = eps[..., 1, 1] - 0.5 * tr
    dev2 = d11 ** 2 + d22 ** 2 + eps[..., 0, 1] ** 2 + eps[..., 1, 0] ** 2
    return np.sqrt(params.delta_min ** 2 + 2.0 / params.e ** 2 * dev2 + tr ** 2)


def viscosities(P, Delta, params: PhysParams = DEFAULT):
    zeta = np.asarray(P, dtype=float) / (2.0 * np.asarray(Delta, dtype=float))
    return zeta, zeta / params.e ** 2


def rheology_fields(eps, h, A, params: PhysParams = DEFAULT) -> RheologyFields:
    P = ice_strength(h, A, params)
    D = delta(eps, params)
    zeta, eta = viscosities(P, D, params)
    return RheologyFields(P=P, delta=D, zeta=zeta, eta=eta, eps=np.asarray(eps, dtype=float))


def vp_stress(eps, zeta, eta, P):
    """``2 eta eps + (zeta - eta) tr(eps) I - P/2 I`` as (..., 2, 2)."""
    eps = np.asarray(eps, dtype=float)
    zeta, eta, P = (np.asarray(x, dtype=float) for x in (zeta, eta, P))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    iso = (zeta - eta) * tr - 0.5 * P
    sigma = 2.0 * eta[..., None, None] * eps
    sigma[..., 0, 0] += iso
    sigma[..., 1, 1] += iso
    return sigma


def _rotated_strain(eps):
    eps = np.asarray(eps, dtype=float)
    return (eps[..., 0, 0] + eps[..., 1, 1], eps[..., 0, 0] - eps[..., 1, 1],
            0.5 * (eps[..., 0, 1] + eps[..., 1, 0]))


def vp_rotated(eps, zeta, P):
    """VP stress for ``e = 2`` in rotated components (sigma_1, sigma_2, s12)."""
    e1, e2, e12 = _rotated_strain(eps)
    return 2.0 * zeta * e1 - P, 0.5 * zeta * e2, 0.5 * zeta * e12


def evp_stress_step(S_prev: StressField, eps, zeta, P, k_s: float, T_evp: float) -> StressField:
    """One subcycle of the EVP stress equation, implicit in sigma."""
    if k_s <= 0 or T_evp <= 0:
        raise ValueError("k_s and T_evp must be positive")
    e1, e2, e12 = _rotated_strain(eps)
    inv_k = 1.0 / k_s
    s1 = (S_prev.sigma1 * inv_k + zeta * e1 / T_evp - P / (2.0 * T_evp)) / (inv_k + 0.5 / T_evp)
    s2 = (S_prev.sigma2 * inv_k + zeta * e2 / T_evp) / (inv_k + 2.0 / T_evp)
    s12 = (S_prev.s12 * inv_k + zeta * e12 / T_evp) / (inv_k + 2.0 / T_evp)
    return StressField.from_rotated(s1, s2, s12)


def mevp_stress_step(S_prev: StressField, eps, zeta, P, alpha: float) -> StressField:
    """Relax each stress component by ``1/alpha`` towards the VP stress."""
    if alpha < 1:
        raise ValueError("alpha_mEVP must be >= 1")
    v1, v2, v12 = vp_rotated(eps, zeta, P)
    r = 1.0 / alpha
    s1 = S_prev.sigma1 + r * (v1 - S_prev.sigma1)
    s2 = S_prev.sigma2 + r * (v2 - S_prev.sigma2)
    s12 = S_prev.s12 + r * (v12 - S_prev.s12)
    return StressField.from_rotated(s1, s2, s12)
