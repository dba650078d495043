"""Stabilized Crouzeix-Raviart sea-ice dynamics (VP, EVP, mEVP) on triangles."""

from .cr_space import VelocityField, interpolate, operators
from .mesh import Mesh, build_uniform_mesh
from .params import DEFAULT, PhysParams
from .rheology import RheologyFields, StressField
from .solvers import Model, SimState, SolverConfig, SolverDiverged, solve_mevp, step_evp, step_vp

__all__ = [
    "DEFAULT", "Mesh", "Model", "PhysParams", "RheologyFields", "SimState", "SolverConfig",
    "SolverDiverged", "StressField", "VelocityField", "build_uniform_mesh", "interpolate",
    "operators", "solve_mevp", "step_evp", "step_vp",
]

__version__ = "0.1.0"
