import numpy as np
import pytest

from ddflow.discretization import Discretization
from ddflow.fixtures import desk_fixture
from ddflow.model import default_boussinesq_model
from ddflow.optimizer import OptimizeOptions, optimize
from ddflow.state import NewtonOptions, solve_state


def coupled_model(**kw):
    args = dict(g_T=1.0, g_S=0.5, D=[[1.0, 0.1], [0.2, 1.0]], buoyancy="saturating",
                yD=lambda x, y: (x, 0.5 * y),
                u_d=lambda x, y: (np.sin(np.pi * x), 0 * y),
                y_d=lambda x, y: (0 * x + 1, y))
    args.update(kw)
    return default_boussinesq_model(**args)


@pytest.fixture(scope="session")
def coupled():
    """n = 4 coupled problem solved at a strong random control."""
    disc = Discretization(4, coupled_model())
    U = 20 * np.random.default_rng(0).standard_normal((disc.mesh.num_triangles, 2))
    state, _ = solve_state(disc, U, NewtonOptions(tol=1e-12))
    return disc, U, state


@pytest.fixture(scope="session")
def desk_kkt():
    """Converged KKT point of the lambda = 10 desk fixture (n = 8)."""
    disc, U0 = desk_fixture(8)
    U, state, adj, rep = optimize(disc, U0, OptimizeOptions(kkt_tol=1e-9))
    assert rep.converged
    return disc, U, state, adj
