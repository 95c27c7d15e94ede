import numpy as np
import pytest

from ddflow.discretization import Discretization
from ddflow.model import default_boussinesq_model
from ddflow.state import (NewtonError, NewtonOptions, continuation_solve, newton_jacobian,
                          residual, residual_norms, solve_state)

from conftest import coupled_model


def test_zero_data_gives_zero_state():
    d = Discretization(4, default_boussinesq_model())
    st, rep = solve_state(d)
    assert rep.converged and rep.iterations == 0
    assert not np.any(st.u) and not np.any(st.p) and not np.any(st.T) and not np.any(st.S)


def test_constant_data_equilibrium():
    c1, c2, gT, gS = 0.7, -0.4, 1.0, 0.5
    d = Discretization(6, default_boussinesq_model(
        g_T=gT, g_S=gS, yD=lambda x, y: (0 * x + c1, 0 * y + c2)))
    st, rep = solve_state(d)
    assert rep.converged
    assert np.abs(st.u).max() < 1e-12
    assert np.allclose(st.T, c1) and np.allclose(st.S, c2)
    y = d.Q.dof_coordinates[:, 1]
    p_exact = (gT * c1 + gS * c2) * (y - 0.5)
    assert np.abs(st.p - p_exact).max() < 1e-11


def test_solution_invariants(coupled):
    d, U, st = coupled
    assert np.all(st.u[d.u_dofs_bnd] == 0)
    assert np.array_equal(st.y[d.y_dofs_bnd], d.y_lift[d.y_dofs_bnd])
    assert abs(d.pressure_mean(st.p)) <= 1e-10 * max(np.linalg.norm(st.p), 1.0)
    assert np.abs(d.B @ st.u).max() < 1e-12
    assert residual_norms(d, residual(d, d.pack(st), U))[0] <= 1e-12


def test_residual_history_decreases():
    d = Discretization(4, coupled_model())
    U = 50 * np.ones((d.mesh.num_triangles, 2))
    _, rep = solve_state(d, U)
    totals = [r[0] for r in rep.residuals]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    assert len(rep.history_rows()) == len(totals)


def test_jacobian_columns_match_finite_differences(coupled):
    d, U, st = coupled
    x = d.pack(st)
    J = newton_jacobian(d, st).tocsc()
    rng = np.random.default_rng(1)
    free = d.free
    for k in rng.choice(free, 20, replace=False):
        e = np.zeros(d.size)
        e[k] = 1e-6
        fd = (residual(d, x + e, U) - residual(d, x - e, U)) / 2e-6
        col = J[:, k].toarray().ravel()
        col[d.constrained] = 0
        assert np.linalg.norm(fd - col) <= 1e-4 * max(np.linalg.norm(col), 1e-12)


def test_jacobian_is_stokes_plus_transport_when_uncoupled():
    d = Discretization(3, default_boussinesq_model(gamma=0.0, g_T=0.0, g_S=0.0))
    J = newton_jacobian(d, d.initial_state()).tocsr()
    assert abs(J[d.su, d.sy]).max() == 0 and abs(J[d.sy, d.su]).max() == 0
    A = J[d.su, d.su]
    assert abs(A - A.T).max() < 1e-14


def test_continuation_single_stage_equals_plain_solve(coupled):
    d, U, st = coupled
    st2, reps = continuation_solve(d, U, ramp=[1.0], opts=NewtonOptions(tol=1e-12))
    assert np.allclose(st2.u, st.u, atol=1e-12) and len(reps) == 1


def test_continuation_zero_data_no_iterations():
    d = Discretization(3, default_boussinesq_model())
    _, reps = continuation_solve(d)
    assert all(r.iterations == 0 for _, r in reps)


def test_continuation_rescues_strong_forcing():
    # direct Newton from the lifting fails at this forcing; five stages succeed
    d = Discretization(4, coupled_model(nu0=0.05, gamma=0.9, g_T=20.0))
    U = 500 * np.random.default_rng(2).standard_normal((d.mesh.num_triangles, 2))
    opts = NewtonOptions(max_iter=8)
    with pytest.raises(NewtonError) as exc:
        solve_state(d, U, opts)
    assert exc.value.report.iterations >= 1
    st, reps = continuation_solve(d, U, ramp=[0.2, 0.4, 0.6, 0.8, 1.0], opts=opts)
    assert residual_norms(d, residual(d, d.pack(st), U))[0] <= 1e-10


@pytest.mark.parametrize("ramp", [[0.5], [0.5, 0.3, 1.0], [], [-0.1, 1.0]])
def test_bad_ramp_rejected(ramp):
    d = Discretization(2, default_boussinesq_model())
    with pytest.raises(ValueError):
        continuation_solve(d, ramp=ramp)
