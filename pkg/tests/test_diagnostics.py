import numpy as np
import pytest
import scipy.linalg as sla

from icefem import diagnostics as dg
from icefem.cr_space import interpolate, to_cartesian
from icefem.mesh import build_uniform_mesh
from icefem.stabilization import stabilizer

DMIN = 2e-9


def conforming_p1(mesh, nodal):
    """Midpoint values of the continuous P1 field with the given vertex values."""
    a, b = mesh.edges.T
    return 0.5 * (nodal[a] + nodal[b])


def boundary_vertices(mesh):
    return np.unique(mesh.edges[mesh.boundary_flag])


def test_energy_trace_zero_field(square):
    tr = dg.weighted_h1(square, [np.zeros((square.n_edges, 2))] * 5, zeta_min=3.0, k=2.0)
    assert tr.final == 0.0 and np.all(tr.E == 0.0)


def test_energy_trace_single_step_uniform_gradient(square):
    G = np.array([[0.3, -1.0], [2.0, 0.5]])
    w = to_cartesian(square, interpolate(square, lambda x, y: (G[0, 0] * x + G[0, 1] * y, G[1, 0] * x + G[1, 1] * y)))
    zeta, k = 7.0, 0.25
    tr = dg.weighted_h1(square, [w, w], zeta_min=zeta, k=k)
    assert tr.final == pytest.approx(k * zeta * np.sum(G * G) * 1.0, rel=1e-12)


def test_energy_trace_additive_and_monotone(square, rng):
    ws = [rng.standard_normal((square.n_edges, 2)) for _ in range(9)]
    tr = dg.weighted_h1(square, ws, zeta_min=2.0, k=0.5)
    assert np.all(np.diff(tr.E) >= 0)
    first = dg.weighted_h1(square, ws[:5], zeta_min=2.0, k=0.5)
    second = dg.weighted_h1(square, ws[4:], zeta_min=2.0, k=0.5, t0=2.0)
    assert tr.final == pytest.approx(first.final + second.final, rel=1e-13)
    assert len(list(tr.rows())) == 9
    with pytest.raises(ValueError):
        dg.EnergyTrace(t=np.arange(3.0), grad_norm_sq=np.ones(2), zeta_min=1.0)


def test_total_deformation_examples(km_mesh):
    assert np.allclose(dg.total_deformation(km_mesh, np.zeros((km_mesh.n_edges, 2))), DMIN, rtol=1e-15)
    rot = interpolate(km_mesh, lambda x, y: (-1e-7 * y, 1e-7 * x))
    assert np.allclose(dg.total_deformation(km_mesh, rot), DMIN, rtol=1e-6)
    g = 4e-8
    shear = interpolate(km_mesh, lambda x, y: (g * y, 0 * x))
    # eps12 = g/2: Delta = sqrt(dmin^2 + 2/4 * 2 (g/2)^2)
    assert np.allclose(dg.total_deformation(km_mesh, shear), np.sqrt(DMIN ** 2 + g ** 2 / 4), rtol=1e-10)


def test_norms_match_definitions(square, rng):
    w = rng.standard_normal((square.n_edges, 2))
    g = dg.grad_norm_sq(square, w)
    e = dg.strain_norm_sq(square, w)
    assert 0 <= e <= g * (1 + 1e-14)
    assert dg.l2_norm_sq(square, np.ones((square.n_edges, 2))) == pytest.approx(2.0, rel=1e-12)


def test_velocity_jump_metric(square, rng):
    assert dg.velocity_jump_metric(square, np.zeros((square.n_edges, 2))) == 0.0
    lin = to_cartesian(square, interpolate(square, lambda x, y: (1.0 + x - 2 * y, 2.0 + 3 * x)))
    assert dg.velocity_jump_metric(square, lin) < 1e-14
    assert dg.velocity_jump_metric(square, lin, reduce="rms") < 1e-14
    # one perturbed interior DOF: its jumps are the unit perturbation on the 4 edges it borders
    w = lin.copy()
    j = square.interior_edges[5]
    w[j] += [0.3, 0.4]
    assert dg.velocity_jump_metric(square, w) == pytest.approx(0.5, rel=1e-12)
    w = rng.standard_normal((square.n_edges, 2))
    assert dg.velocity_jump_metric(square, w, "rms") <= dg.velocity_jump_metric(square, w)
    with pytest.raises(ValueError):
        dg.velocity_jump_metric(square, w, "mean")


@pytest.mark.parametrize("stabilized", [False, True])
def test_korn_matches_dense_eigensolver(stabilized):
    mesh = build_uniform_mesh(1.0, 1.0, 0.25)
    A, B = dg.quadratic_forms(mesh, stabilized)
    ref = sla.eigh(A.toarray(), B.toarray(), eigvals_only=True)[0]
    est = dg.estimate_korn_constant(mesh, stabilized=stabilized)
    assert est.value == pytest.approx(ref, rel=1e-6)
    assert 0 < est.value <= 2
    assert np.all(est.mode[mesh.boundary_flag] == 0)


def test_korn_quotients_in_range(square, rng):
    A, B = dg.quadratic_forms(square)
    for _ in range(20):
        x = rng.standard_normal(A.shape[0])
        q = (x @ (A @ x)) / (x @ (B @ x))
        assert 0 < q <= 2


def test_conforming_fields_respect_continuous_korn(square, rng):
    # H^1_0 fields: |grad v|^2 = 2 |eps|^2 - |div v|^2, so the quotient is >= 1/2
    interior_v = np.setdiff1d(np.arange(square.n_vertices), boundary_vertices(square))
    for _ in range(30):
        nodal = np.zeros((square.n_vertices, 2))
        nodal[interior_v] = rng.standard_normal((len(interior_v), 2))
        w = conforming_p1(square, nodal)
        assert dg.strain_norm_sq(square, w) >= 0.5 * dg.grad_norm_sq(square, w) * (1 - 1e-12)
        assert stabilizer(square).energy(w, np.ones(square.n_edges)) < 1e-24


def test_unstabilized_mode_has_jumps():
    mesh = build_uniform_mesh(1.0, 1.0, 0.125)
    est = dg.estimate_korn_constant(mesh, stabilized=False)
    assert est.value < 0.05
    assert stabilizer(mesh).energy(est.mode, np.ones(mesh.n_edges)) > 1e-3 * dg.grad_norm_sq(mesh, est.mode)


def test_poincare_tends_to_continuous_value():
    exact = 1.0 / (2 * np.pi ** 2)  # unit square, H^1_0 vector fields
    vals = [dg.estimate_poincare_constant(build_uniform_mesh(1.0, 1.0, h)) for h in (0.25, 0.125, 0.0625)]
    errs = [abs(v - exact) for v in vals]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01 * exact


def test_poincare_scales_with_length(km_mesh):
    unit = dg.estimate_poincare_constant(build_uniform_mesh(1.0, 1.0, 0.1))
    km = dg.estimate_poincare_constant(build_uniform_mesh(500e3, 500e3, 50e3))
    assert km == pytest.approx(unit * 500e3 ** 2, rel=1e-6)


def test_inverse_iteration_failure_is_reported(square):
    A, B = dg.quadratic_forms(square)
    with pytest.raises(dg.NotConverged):
        dg.smallest_eigenpair(A, B, maxiter=1, tol=1e-30)


def _record(mesh, V, R, **kw):
    base = dict(k=600.0, velocities=V, R=R, zeta_min=1e12, zeta0=np.full(mesh.n_cells, 1e12), rho_h=900.0,
                drag_coef=1026 * 5.5e-3 * 0.1)
    base.update(kw)
    return dg.RunRecord(**base)


def test_bound_report_trivial_run(square):
    Z = np.zeros((4, square.n_edges, 2))
    rep = dg.theorem_bound_report(square, _record(square, Z, Z), c_k=0.5, c_p=0.05)
    assert all(v == 0 for k, v in rep.terms.items() if k not in ("a", "b", "c"))
    assert rep.vp_ratio == 0.0 and rep.evp_ratio == 0.0
    assert rep.gamma == 50.0 and rep.gamma2 == pytest.approx(1026 * 5.5e-3 * 0.1)
    assert any("tr(sigma)" in n for n in rep.notes)


def test_bound_report_terms(square, rng):
    V = rng.standard_normal((5, square.n_edges, 2)) * 0.01
    V[:, square.boundary_flag] = 0.0
    R = np.broadcast_to(rng.standard_normal((1, square.n_edges, 2)), V.shape).copy()
    rep = dg.theorem_bound_report(square, _record(square, V, R, k=2.0), c_k=0.4, c_p=0.05)
    assert all(v >= 0 for _, v in rep.rows())
    # constant-in-time data: d/dt R = 0, so the EVP data integral equals the VP one
    assert rep.terms["int_dtR_plus_R_sq"] == pytest.approx(rep.terms["int_R_sq"], rel=1e-12)
    assert rep.terms["int_R_sq"] == pytest.approx(4 * 2.0 * dg.l2_norm_sq(square, R[0]), rel=1e-12)
    T, rh = 100.0, 900.0
    assert rep.terms["a"] == pytest.approx(rh * T / 4 + rh / (2 * rep.gamma))
    assert rep.terms["b"] == pytest.approx(rep.gamma2 + rh / T + rep.gamma * rh / 2)
    assert rep.gamma0 == pytest.approx(0.4 * 1e12 / (0.05 * T))


def test_bound_report_refuses_hypothesis_violations(square):
    Z = np.zeros((3, square.n_edges, 2))
    with pytest.raises(ValueError):
        dg.theorem_bound_report(square, _record(square, Z, Z, linear_drag=False), 0.5, 0.05)
    with pytest.raises(ValueError):
        dg.theorem_bound_report(square, _record(square, Z, Z, advection=True), 0.5, 0.05)


@pytest.fixture(scope="module")
def bound_ratios(tmp_path_factory):
    from icefem.scenarios import load_record, run_scenario, from_preset

    out = {}
    for stabilize in (True, False):
        ratios = []
        for km in (50.0, 25.0, 12.5):
            d = tmp_path_factory.mktemp(f"bound_{stabilize}_{km:g}")
            s = run_scenario(from_preset("channel_desk", mesh_km=km, stabilize=stabilize, linear_drag=True,
                                         record=True), d)
            c_k = dg.estimate_korn_constant(s.mesh, stabilized=stabilize).value
            c_p = dg.estimate_poincare_constant(s.mesh)
            rep = dg.theorem_bound_report(s.mesh, load_record(d), c_k, c_p)
            ratios.append((rep.vp_ratio, rep.evp_ratio))
        out[stabilize] = np.array(ratios)
    return out


def test_bound_ratio_bounded_when_stabilized(bound_ratios):
    r = bound_ratios[True]
    assert np.all(r > 0) and np.all(r <= 1.0)
    assert np.all(r[1:] <= 2.0 * r[0])


@pytest.mark.xfail(strict=True, reason="with measured c_k the unstabilized right-hand side grows like 1/c_k, "
                                        "so the ratio shrinks under refinement; see the decisions ledger")
def test_bound_ratio_grows_without_stabilization(bound_ratios):
    vp = bound_ratios[False][:, 0]
    assert vp[1] > vp[0] and vp[2] > vp[1]
