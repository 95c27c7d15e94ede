import numpy as np
import pytest

from ddflow.discretization import Discretization
from ddflow.mms import convergence_study, manufactured_problem, observed_orders, state_errors
from ddflow.state import residual, residual_norms


@pytest.fixture(scope="module")
def prob():
    return manufactured_problem()


def test_exact_fields_satisfy_boundary_and_divergence(prob):
    s = np.linspace(0, 1, 7)
    for x, y in [(s, 0 * s), (s, 0 * s + 1), (0 * s, s), (0 * s + 1, s)]:
        assert np.abs(np.asarray(prob.u(x, y))).max() < 1e-14
    x, y = np.random.default_rng(0).uniform(0, 1, (2, 20))
    g = np.asarray(prob.grad_u(x, y))
    assert np.abs(g[0] + g[3]).max() < 1e-12


def _interpolant_residual(n, prob):
    d = Discretization(n, prob.model)
    x = d.pack(d.initial_state())
    xe = x.copy()
    xe[d.su] = d.V.interpolate(prob.u)
    xe[d.sp_] = d.Q.interpolate(lambda x, y: prob.p(x, y)[0])
    xe[d.sy] = d.Y.interpolate(prob.y)
    U = d.zero_control()
    return residual_norms(d, residual(d, xe, U))[0] / residual_norms(d, residual(d, x, U))[0]


def test_interpolant_residual_shrinks_under_refinement(prob):
    r8, r16 = _interpolant_residual(8, prob), _interpolant_residual(16, prob)
    assert r16 < 0.05 and r16 < 0.4 * r8


def test_observed_orders_arithmetic():
    errs = [{"a": 1.0}, {"a": 0.25}, {"a": 0.0625}]
    assert [o["a"] for o in observed_orders([4, 8, 16], errs)] == pytest.approx([2.0, 2.0])


def test_coarse_convergence(prob):
    errors, orders = convergence_study((4, 8), prob)
    assert errors[1]["u_h1"] < errors[0]["u_h1"]
    assert orders[0]["u_l2"] > 2.3 and orders[0]["y_h1"] > 1.6
    assert set(errors[0]) == {"u_l2", "u_h1", "p_l2", "y_l2", "y_h1"}
    d = Discretization(4, prob.model)
    zero = state_errors(d, d.initial_state(), prob)
    assert zero["u_l2"] > errors[0]["u_l2"]
