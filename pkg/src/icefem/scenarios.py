"""Scenario definitions, config files and the run loop.

A config file is flat ``key = value`` text with ``#`` comments.  The
optional ``preset`` key loads a named preset first; every other key then
overrides a :class:`ScenarioConfig` field.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as dg
from .cr_space import to_cartesian
from .forcing import ForcingConfig, cross_er, manufactured_rhs
from .io import CsvTrace, write_csv, write_vtk
from .mesh import Mesh, build_uniform_mesh
from .params import DEFAULT, PhysParams
from .solvers import STEPPERS, Model, SimState, SolverConfig, SolverDiverged
from .transport import limit_tracers, upwind_step

log = logging.getLogger(__name__)

DAY = 86400.0
TRACE_COLUMNS = ("step", "t", "max_speed", "dE", "pseudo_residual")


def preset_channel_ocean(x, y, Lx: float = 500e3, Ly: float = 500e3):
    """Ocean current of the channel and box tests (m/s)."""
    return 0.1 * (2.0 * np.asarray(y) - Ly) / Ly, 0.1 * (Lx - 2.0 * np.asarray(x)) / Lx


def preset_box_wind(x, y, t, Lx: float = 1000e3, Ly: float = 1000e3, period: float = 30 * DAY):
    """Time-modulated wind of the box test (m/s)."""
    s = np.sin(2 * np.pi * np.asarray(x) / Lx) * np.sin(2 * np.pi * np.asarray(y) / Ly)
    amp = math.sin(2 * math.pi * t / period) - 3.0
    return 5.0 + amp * s, 5.0 + amp * s


@dataclass
class ScenarioConfig:
    scenario: str = "channel"  # strain | channel | box
    Lx: float = 500e3
    Ly: float = 500e3
    mesh_km: float = 25.0
    solver: str = "mevp"  # vp | evp | mevp
    stabilize: bool = True
    k: float = 600.0
    n_sub: int = 500
    T: float = 6 * 3600.0
    output_every: int = 0  # steps between VTK snapshots; 0 writes the final state only
    h0: str = "constant"  # constant | linear_x
    h0_value: float = 1.0
    A0: str = "linear_x"
    A0_value: float = 1.0
    forcing: str = "channel"  # strain_full | strain_grad | channel | box | none
    advection: bool = False
    linear_drag: bool = False
    steady_rate: float = 0.0  # 1/s; > 0 stops once max|dv|/k <= steady_rate * max|v|
    max_steps: int = 0  # 0 means T / k
    record: bool = False  # keep the velocity history for the bound report
    wind_period: float = 30 * DAY
    alpha_stab: float = 1.0
    T_evp: float = 100.0
    alpha_mevp: float = 500.0
    beta_mevp: float = 500.0

    def __post_init__(self):
        if self.scenario not in ("strain", "channel", "box"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.solver not in STEPPERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.forcing not in ("strain_full", "strain_grad", "channel", "box", "none"):
            raise ValueError(f"unknown forcing preset {self.forcing!r}")
        for name in ("h0", "A0"):
            if getattr(self, name) not in ("constant", "linear_x"):
                raise ValueError(f"unknown initial-field preset {name} = {getattr(self, name)!r}")
        for name in ("Lx", "Ly", "mesh_km", "k", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_sub < 1:
            raise ValueError("n_sub must be >= 1")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.k))
        return min(n, self.max_steps) if self.max_steps else n

    def solver_config(self) -> SolverConfig:
        return SolverConfig(k=self.k, n_sub=self.n_sub, T_evp=self.T_evp, alpha_mevp=self.alpha_mevp,
                            beta_mevp=self.beta_mevp, stabilize=self.stabilize, alpha_stab=self.alpha_stab)

    def to_text(self) -> str:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name} = {('on' if v else 'off') if isinstance(v, bool) else repr(v) if isinstance(v, float) else v}")
        return "\n".join(out) + "\n"


_STRAIN = dict(scenario="strain", Lx=500e3, Ly=500e3, solver="vp", forcing="strain_full", h0="constant",
               A0="constant", T=1.0, steady_rate=1e-8, n_sub=1)
_CHANNEL = dict(scenario="channel", Lx=500e3, Ly=500e3, forcing="channel", A0="linear_x")
_BOX = dict(scenario="box", Lx=1000e3, Ly=1000e3, forcing="box", A0="linear_x", advection=True)

PRESETS = {
    # reference-resolution runs
    "strain": dict(_STRAIN, mesh_km=16.5, k=1e-6),
    "strain_grad": dict(_STRAIN, mesh_km=16.5, k=1e-6, forcing="strain_grad"),
    "channel": dict(_CHANNEL, mesh_km=10.0, k=600.0, n_sub=500, T=DAY),
    "channel_vp": dict(_CHANNEL, mesh_km=10.0, solver="vp", k=0.1, T=DAY),
    "box": dict(_BOX, mesh_km=15.0, k=600.0, n_sub=500, T=30 * DAY),
    # desk scale
    "strain_desk": dict(_STRAIN, mesh_km=30.0, k=3e-6),
    "strain_grad_desk": dict(_STRAIN, mesh_km=30.0, k=3e-6, forcing="strain_grad"),
    "channel_desk": dict(_CHANNEL, mesh_km=25.0, k=600.0, n_sub=100, T=6 * 3600.0),
    "box_desk": dict(_BOX, mesh_km=30.0, k=600.0, n_sub=500, T=3 * DAY),
}


def _coerce(name: str, raw: str, typ):
    raw = raw.strip()
    if typ is bool or typ == "bool":
        low = raw.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ValueError(f"{name}: expected on/off, got {raw!r}")
    if typ is int or typ == "int":
        return int(float(raw))
    if typ is float or typ == "float":
        return float(raw)
    return raw


_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def from_preset(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return ScenarioConfig(**{**PRESETS[name], **overrides})


def parse_config(text: str) -> ScenarioConfig:
    values, preset = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "preset":
            preset = raw
        elif key in _TYPES:
            values[key] = _coerce(key, raw, _TYPES[key])
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return from_preset(preset, **values) if preset else ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def override(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def build_mesh(cfg: ScenarioConfig) -> Mesh:
    return build_uniform_mesh(cfg.Lx, cfg.Ly, cfg.mesh_km * 1e3)


def initial_field(kind: str, value: float, mesh: Mesh, Lx: float) -> np.ndarray:
    if kind == "constant":
        return np.full(mesh.n_cells, float(value))
    # cell average of a linear function is its centroid value
    return mesh.cell_centroid[:, 0] / Lx


def build_model(cfg: ScenarioConfig, mesh: Mesh, params: PhysParams = DEFAULT) -> Model:
    Lx, Ly = cfg.Lx, cfg.Ly
    if cfg.forcing in ("strain_full", "strain_grad"):
        kind = "full" if cfg.forcing == "strain_full" else "grad_only"
        zeta = params.P_star * cfg.h0_value / (2.0 * params.delta_min)
        if cfg.h0 != "constant" or cfg.A0 != "constant" or cfg.A0_value != 1.0:
            raise ValueError("the strain test needs constant h and A = 1")
        forcing = ForcingConfig(params=params, use_wind=False, use_coriolis=False, use_drag=False)
        return Model(mesh, forcing,
                     stress_law="viscous_sym" if kind == "full" else "viscous_grad",
                     viscous_factor=0.5 if kind == "full" else 1.0, unit_inertia=True,
                     body_force=lambda x, y: manufactured_rhs(kind, x, y, zeta, Lx, Ly))
    if cfg.forcing == "none":
        forcing = ForcingConfig(params=params, use_wind=False, use_coriolis=False, use_drag=False,
                                linear_drag=cfg.linear_drag)
    else:
        ocean = lambda x, y: preset_channel_ocean(x, y, Lx, Ly)  # noqa: E731
        if cfg.forcing == "channel":
            forcing = ForcingConfig(params=params, ocean=ocean, use_wind=False, use_coriolis=False,
                                    linear_drag=cfg.linear_drag)
        else:
            wind = lambda x, y, t: preset_box_wind(x, y, t, Lx, Ly, cfg.wind_period)  # noqa: E731
            forcing = ForcingConfig(params=params, wind=wind, ocean=ocean, linear_drag=cfg.linear_drag)
    return Model(mesh, forcing)


def initial_state(cfg: ScenarioConfig, mesh: Mesh) -> SimState:
    h = initial_field(cfg.h0, cfg.h0_value, mesh, cfg.Lx)
    A = initial_field(cfg.A0, cfg.A0_value, mesh, cfg.Lx)
    h, A = limit_tracers(h, A)
    return SimState.at_rest(mesh, h, A)


def data_term(model: Model, h: np.ndarray, t: float) -> np.ndarray:
    """Velocity-independent forcing ``tau_a + rho_w C_w1 v_w + rho h f e_r x v_w`` at midpoints."""
    f = model.forcing
    R = f.wind_stress_at(model.pts, t) if f.use_wind else np.zeros_like(model.pts)
    if f.use_drag:
        R = R + f.drag(np.zeros_like(model.v_w), model.v_w)[0]
    if f.use_coriolis:
        rho_h = model.coriolis_weight(h) / model.weight
        R = R + model.params.f_coriolis * rho_h[:, None] * cross_er(model.v_w)
    return R


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------

@dataclass
class RunSummary:
    scenario: str
    solver: str
    stabilize: bool
    n_edges: int
    steps: int
    t: float
    max_v1: float
    max_v2: float
    E_of_v: float
    zeta_min: float
    diverged: bool
    steady: bool
    wall_time: float
    message: str = ""
    state: Optional[SimState] = field(default=None, repr=False)
    mesh: Optional[Mesh] = field(default=None, repr=False)
    energy: Optional[dg.EnergyTrace] = field(default=None, repr=False)

    def to_text(self) -> str:
        keys = ("scenario", "solver", "stabilize", "n_edges", "steps", "t", "max_v1", "max_v2", "E_of_v",
                "zeta_min", "diverged", "steady", "wall_time", "message")
        out = []
        for k in keys:
            v = getattr(self, k)
            out.append(f"{k} = {('on' if v else 'off') if isinstance(v, bool) else ('%.17g' % v) if isinstance(v, float) else v}")
        return "\n".join(out) + "\n"


def _snapshot(path: Path, mesh: Mesh, model: Model, state: SimState, w: np.ndarray):
    cv = model.ops.cell_values(w)
    write_vtk(mesh, {
        "h": state.h, "A": state.A,
        "Delta": dg.total_deformation(mesh, w, model.params),
        "speed": np.hypot(cv[:, 0], cv[:, 1]),
        "velocity": cv,
    }, path)


def run_scenario(cfg: ScenarioConfig, out_dir=None, params: PhysParams = DEFAULT,
                 mesh: Optional[Mesh] = None, progress_every: int = 0) -> RunSummary:
    """Run the configured scenario; writes trace, snapshots and summary if ``out_dir`` is given."""
    t_start = time.perf_counter()
    mesh = build_mesh(cfg) if mesh is None else mesh
    model = build_model(cfg, mesh, params)
    state = initial_state(cfg, mesh)
    scfg = cfg.solver_config()
    stepper = STEPPERS[cfg.solver]
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.to_text())
    trace = CsvTrace(out / "trace.csv", TRACE_COLUMNS) if out else None
    log.info("%s/%s stabilize=%s on %d edges, %d steps of %g s", cfg.scenario, cfg.solver, cfg.stabilize,
             mesh.n_edges, cfg.n_steps, cfg.k)

    zeta_min = math.inf
    times, grads = [], []
    history, data = [], []
    zeta0 = None
    diverged, steady, message = False, False, ""
    w = to_cartesian(mesh, state.V)
    try:
        for n in range(cfg.n_steps):
            rheo = state.rheo if state.rheo is not None else model.rheology(w, state.h, state.A)
            zeta_min = min(zeta_min, float(rheo.zeta.min()))
            if zeta0 is None:
                zeta0 = rheo.zeta.copy()
            g = dg.grad_norm_sq(mesh, w)
            times.append(state.t)
            grads.append(g)
            if cfg.record:
                history.append(w.copy())
                data.append(data_term(model, state.h, state.t))

            state = stepper(model, state, scfg)
            if cfg.advection:
                h = upwind_step(mesh, state.h, state.V, cfg.k)
                A = upwind_step(mesh, state.A, state.V, cfg.k)
                h, A = limit_tracers(h, A)
                state = replace(state, h=h, A=A, rheo=None)
            w_new = to_cartesian(mesh, state.V)
            speed = float(np.max(np.hypot(w_new[:, 0], w_new[:, 1]), initial=0.0))
            if trace:
                trace.append((state.step, state.t, speed, zeta_min * cfg.k * g, state.pseudo_residual))
            if out and cfg.output_every and state.step % cfg.output_every == 0:
                _snapshot(out / f"snap_{state.step}.vtk", mesh, model, state, w_new)
            if progress_every and state.step % progress_every == 0:
                log.info("step %d t=%.6g max|v|=%.4g", state.step, state.t, speed)
            change = float(np.max(np.abs(w_new - w), initial=0.0))
            w = w_new
            if cfg.steady_rate > 0 and change <= cfg.steady_rate * cfg.k * max(speed, 1e-300):
                steady = True
                break
    except SolverDiverged as exc:
        diverged, message = True, str(exc)
        log.warning("%s", exc)
    finally:
        if trace:
            trace.close()

    if not diverged:
        rheo = state.rheo if state.rheo is not None else model.rheology(w, state.h, state.A)
        zeta_min = min(zeta_min, float(rheo.zeta.min()))
        times.append(state.t)
        grads.append(dg.grad_norm_sq(mesh, w))
        if cfg.record:
            history.append(w.copy())
            data.append(data_term(model, state.h, state.t))
    if not math.isfinite(zeta_min):
        zeta_min = 0.0
    energy = dg.EnergyTrace(t=np.array(times), grad_norm_sq=np.array(grads), zeta_min=zeta_min)
    summary = RunSummary(
        scenario=cfg.scenario, solver=cfg.solver, stabilize=cfg.stabilize, n_edges=mesh.n_edges,
        steps=state.step, t=state.t, max_v1=float(np.abs(w[:, 0]).max(initial=0.0)),
        max_v2=float(np.abs(w[:, 1]).max(initial=0.0)), E_of_v=energy.final, zeta_min=zeta_min,
        diverged=diverged, steady=steady, wall_time=time.perf_counter() - t_start, message=message,
        state=state, mesh=mesh, energy=energy)

    if out:
        if not diverged:
            _snapshot(out / f"snap_{state.step}.vtk", mesh, model, state, w)
        write_csv(energy.rows(), out / "energy.csv", ("t", "grad_norm_sq", "E_of_v"))
        (out / "summary.txt").write_text(summary.to_text())
        if cfg.record and not diverged:
            h_const = cfg.h0 == "constant" and not cfg.advection
            np.savez(out / "record.npz", k=cfg.k, velocities=np.array(history), R=np.array(data),
                     zeta_min=zeta_min, zeta0=zeta0, rho_h=params.rho_ice * cfg.h0_value if h_const else np.nan,
                     drag_coef=params.rho_water * params.C_water * model.forcing.drag_speed,
                     T_evp=cfg.T_evp, linear_drag=cfg.linear_drag, advection=cfg.advection or not h_const)
    return summary


def load_record(run_dir) -> dg.RunRecord:
    z = np.load(Path(run_dir) / "record.npz")
    return dg.RunRecord(k=float(z["k"]), velocities=z["velocities"], R=z["R"], zeta_min=float(z["zeta_min"]),
                        zeta0=z["zeta0"], rho_h=float(z["rho_h"]), drag_coef=float(z["drag_coef"]),
                        T_evp=float(z["T_evp"]), linear_drag=bool(z["linear_drag"]),
                        advection=bool(z["advection"]))
