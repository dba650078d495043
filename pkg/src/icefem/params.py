from dataclasses import dataclass


@dataclass(frozen=True)
class PhysParams:
    """Physical constants of the momentum equation plus rheology/solver knobs."""

    rho_ice: float = 900.0  # kg/m^3
    rho_air: float = 1.3  # kg/m^3
    rho_water: float = 1026.0  # kg/m^3
    C_air: float = 1.2e-3
    C_water: float = 5.5e-3
    f_coriolis: float = 1.46e-4  # 1/s
    P_star: float = 27.5e3  # N/m^2
    C_conc: float = 20.0
    e: float = 2.0  # yield-curve eccentricity
    delta_min: float = 2e-9  # 1/s
    T_evp: float = 100.0  # s
    alpha_mevp: float = 500.0
    beta_mevp: float = 500.0
    alpha_stab: float = 1.0


DEFAULT = PhysParams()
