import numpy as np
import pytest

from ddflow.discretization import Discretization
from ddflow.model import DiagnosticsConfig, default_boussinesq_model
from ddflow.optimizer import ControlField, cell_average, inner
from ddflow.sensitivity import AdjointFields, Sensitivity
from ddflow.ssc import (ADVISORY, broken_h2_seminorm, lagrangian_second_form, lambda_threshold,
                        quadratic_growth_check, second_difference, ssc_curvature_probe,
                        strongly_active_set, threshold_bounds, verify_active_estimate)
from ddflow.state import NewtonOptions, solve_state


def test_active_set_examples():
    U = np.ones((5, 2))
    phi = np.full((5, 2), 0.5)
    assert strongly_active_set(U, phi, 1.0, 1.0).mask.all()
    assert not strongly_active_set(U, phi, 1.0, 2.0).mask.any()
    assert not strongly_active_set(U, -U, 1.0, 1e-12).mask.any()
    with pytest.raises(ValueError):
        strongly_active_set(U, phi, 1.0, 0.0)


def test_active_set_monotone_in_epsilon():
    rng = np.random.default_rng(0)
    U, phi = rng.standard_normal((50, 2)), rng.standard_normal((50, 2))
    eps = np.sort(rng.uniform(0.01, 2.0, 10))
    masks = [strongly_active_set(U, phi, 0.7, e).mask for e in eps]
    for a, b in zip(masks, masks[1:]):
        assert np.all(b <= a)


def test_active_estimate_trivial_cases():
    area = np.full(4, 0.25)
    U = np.ones((4, 2))
    mask = strongly_active_set(U, np.zeros((4, 2)), 1.0, 0.5)
    assert verify_active_estimate(area, U, U, np.zeros((4, 2)), 1.0, mask)["passed"]
    empty = strongly_active_set(U, np.zeros((4, 2)), 1.0, 5.0)
    rep = verify_active_estimate(area, -U, U, np.zeros((4, 2)), 1.0, empty)
    assert rep["lhs"] == 0 and rep["rhs"] == 0 and rep["passed"]


def test_active_estimate_at_kkt(desk_kkt):
    d, U, st, adj = desk_kkt
    phi = cell_average(d, adj.phi)
    probe = ssc_curvature_probe(d, U, st, adj, n_dirs=1)
    mask = strongly_active_set(U, phi, d.model.lam, probe.epsilon)
    assert mask.count > 0
    rng = np.random.default_rng(0)
    for _ in range(20):
        V = rng.uniform(U.lower, U.upper)
        assert verify_active_estimate(d.area, V, U, phi, d.model.lam, mask)["passed"]


def _zero_adjoint(d):
    return AdjointFields(np.zeros(d.nu_), np.zeros(d.np_), np.zeros(d.ny))


def test_second_form_at_zero_adjoint():
    d = Discretization(4, default_boussinesq_model(lam=2.0))
    st = d.initial_state()
    h = np.tile([1.0, 0.0], (d.mesh.num_triangles, 1))
    val = lagrangian_second_form(d, st, _zero_adjoint(d), np.zeros(d.nu_), np.zeros(d.ny), h)
    assert val == pytest.approx(2.0, rel=1e-13)


def test_second_form_term_dropout(coupled):
    # linear buoyancy and gamma = 0 remove the nu_TT and F_yy terms
    d0, U, _ = coupled
    m = default_boussinesq_model(gamma=0.0, g_T=1.0, D=[[1.0, 0.1], [0.2, 1.0]],
                                 yD=lambda x, y: (x, 0.5 * y),
                                 u_d=lambda x, y: (np.sin(np.pi * x), 0 * y))
    d = Discretization(d0.mesh, m)
    st, _ = solve_state(d, U)
    s = Sensitivity(d, st)
    adj = s.adjoint()
    h = np.random.default_rng(1).standard_normal(U.shape)
    lin = s.linearized(h)
    val = lagrangian_second_form(d, st, adj, lin.zeta, lin.mu, h, cross_terms=False)
    C = d.M  # independent evaluation: c~(z, z, phi) = phi^T C(z) z
    from ddflow.fem import forms
    c = adj.phi @ (forms.assemble_c_skew(lin.zeta, d.V) @ lin.zeta)
    expect = (lin.zeta @ (C @ lin.zeta) + lin.mu @ (C @ lin.mu)
              + d.model.lam * inner(d.area, h, h) - 2 * c)
    assert val == pytest.approx(expect, rel=1e-12)


def test_second_form_matches_second_difference(coupled):
    d, U, st = coupled
    s = Sensitivity(d, st)
    adj = s.adjoint()
    rng = np.random.default_rng(2)
    for _ in range(3):
        h = rng.standard_normal(U.shape)
        lin = s.linearized(h)
        q = lagrangian_second_form(d, st, adj, lin.zeta, lin.mu, h)
        fd = second_difference(d, st, U, adj, lin.zeta, lin.mu, h)
        assert abs(q - fd) <= 1e-4 * abs(fd)


def test_probe_sigma_at_least_lambda_with_zero_adjoint():
    # U = 0 with zero data: nothing active, L_ww >= lam |h|_2^2 >= lam |h|_{4/3}^2 on |Omega| = 1
    d = Discretization(4, default_boussinesq_model(lam=3.0))
    U = ControlField(d.zero_control(), -5.0, 5.0)
    st = d.initial_state()
    rep = ssc_curvature_probe(d, U, st, _zero_adjoint(d), n_dirs=10, seed=4)
    assert rep.active == 0 and len(rep.results) == 10
    assert rep.verdict >= 3.0 * (1 - 1e-12)
    assert all(r.sigma >= 3.0 * (1 - 1e-12) for r in rep.results)


def test_probe_degenerate_when_fully_active(desk_kkt):
    d, U, st, adj = desk_kkt
    tiny = ControlField(np.clip(U.values, -1e-9, 1e-9), -1e-9, 1e-9)
    rep = ssc_curvature_probe(d, tiny, st, adj, epsilon=1e-300, n_dirs=5)
    assert rep.verdict is None and "degenerate" in rep.notice


def test_probe_deterministic(desk_kkt):
    d, U, st, adj = desk_kkt
    a = ssc_curvature_probe(d, U, st, adj, n_dirs=5, seed=7)
    b = ssc_curvature_probe(d, U, st, adj, n_dirs=5, seed=7)
    assert a.csv_rows() == b.csv_rows()


def test_lambda_threshold_arithmetic():
    b = dict(M_psi=1.0, M_phi=1.0, M_hat=1.0, M_bar=1.0)
    assert lambda_threshold(4.0, b)["threshold"] == 3.0
    assert lambda_threshold(4.0, b)["verdict"]
    assert not lambda_threshold(2.0, b)["verdict"]
    rep = lambda_threshold(2.0, b, DiagnosticsConfig())
    assert rep["label"] == ADVISORY and rep["M_hat"] == 1.0


def test_lambda_threshold_perfect_tracking():
    m = default_boussinesq_model(g_T=1.0)
    d = Discretization(3, m)
    st, _ = solve_state(d, np.ones((d.mesh.num_triangles, 2)))
    bounds = threshold_bounds(d, st, _zero_adjoint(d))
    assert bounds["M_phi"] == 0
    rep = lambda_threshold(1e-6, bounds)
    assert rep["threshold"] == 0 and rep["verdict"]


def test_growth_check_excludes_zero_steps(desk_kkt):
    d, U, st, adj = desk_kkt
    pinned = ControlField(U.values, U.values, U.values)
    rep = quadratic_growth_check(d, pinned, st, radius=0.1, n_samples=3)
    assert rep["excluded"] == 3 and rep["theta_est"] is None and not rep["passed"]


def test_broken_h2_seminorm_of_quadratic():
    d = Discretization(3, default_boussinesq_model())
    v = d.V.interpolate(lambda x, y: (x * x, 0 * y))
    # Hess(x^2) = diag(2, 0): |.|^2 = 4 over the unit square
    assert broken_h2_seminorm(d, v) == pytest.approx(2.0, rel=1e-12)
