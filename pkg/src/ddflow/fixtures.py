"""Named analytic expressions and the standard verification fixtures.

Configuration files refer to boundary data, desired states and reference
controls by name only; the registries below are the complete vocabulary.
"""
import numpy as np

from .discretization import Discretization
from .model import default_boussinesq_model
from .optimizer import ControlField
from .state import NewtonOptions, solve_state


def _zero(x, y):
    return 0.0 * x, 0.0 * y


PAIR_FIELDS = {
    "zero": _zero,
    "linear-x": lambda x, y: (x + 0.0 * y, 0.0 * x),
    "linear-xy": lambda x, y: (x + 0.0 * y, 0.5 * y + 0.0 * x),
    "constant": lambda x, y: (1.0 + 0.0 * x, 0.5 + 0.0 * y),
    "ramp": lambda x, y: (1.0 - x + 0.0 * y, 0.3 + 0.0 * x),
}

VELOCITY_FIELDS = {
    "zero": _zero,
    "vortex": lambda x, y: (200.0 * np.sin(np.pi * x) * np.sin(np.pi * y),
                            100.0 * np.sin(2 * np.pi * x) * np.sin(np.pi * y)),
    "shear": lambda x, y: (np.sin(np.pi * x) + 0.0 * y, 0.0 * x),
}


def _cell_vortex(c):
    return np.stack([10.0 * np.sin(np.pi * c[:, 0]) * np.sin(np.pi * c[:, 1]),
                     5.0 * np.cos(np.pi * c[:, 0]) + 0.0 * c[:, 1]], axis=1)


CONTROLS = {
    "zero": lambda c: np.zeros((c.shape[0], 2)),
    "vortex": _cell_vortex,
    "constant": lambda c: np.tile([1.0, 0.0], (c.shape[0], 1)),
}


def lookup(registry, name, what):
    try:
        return registry[name]
    except KeyError:
        raise ValueError(f"unknown {what} {name!r}; choose from {sorted(registry)}") from None


def cell_control(mesh, name):
    return lookup(CONTROLS, name, "control")(mesh.centroids())


# -- verification fixtures -----------------------------------------------------------

BASE = dict(g_T=1.0, g_S=0.5, D=[[1.0, 0.1], [0.2, 1.0]])


def desk_fixture(n=8, lam=10.0, bound=0.05):
    """Tracking problem whose optimum clips on part of the domain."""
    model = default_boussinesq_model(buoyancy="saturating", lam=lam, yD=PAIR_FIELDS["linear-xy"],
                                     u_d=VELOCITY_FIELDS["vortex"], y_d=PAIR_FIELDS["ramp"],
                                     **BASE)
    disc = Discretization(n, model)
    U0 = ControlField(disc.zero_control(), -bound, bound)
    return disc, U0


def taylor_fixture(n=8):
    """Low-lambda, strongly forced fixture where j is visibly non-quadratic."""
    model = default_boussinesq_model(nu0=0.2, buoyancy="saturating", lam=1e-3,
                                     yD=PAIR_FIELDS["linear-xy"], u_d=VELOCITY_FIELDS["shear"],
                                     y_d=PAIR_FIELDS["constant"], **BASE)
    disc = Discretization(n, model)
    U = 200.0 * np.random.default_rng(3).standard_normal((disc.mesh.num_triangles, 2))
    return disc, U


def inverse_crime_fixture(n=16, lam=1e-4, lower=-100.0, upper=100.0, ustar="vortex"):
    """Desired states generated by a forward solve at a known control U*.

    Returns ``(disc, U0, Ustar)`` with ``U0`` the zero control carrying the bounds.
    """
    base = default_boussinesq_model(lam=lam, yD=PAIR_FIELDS["linear-xy"], **BASE)
    d0 = Discretization(n, base)
    Ustar = cell_control(d0.mesh, ustar)
    st, _ = solve_state(d0, Ustar, NewtonOptions(tol=1e-12))
    disc = Discretization(d0.mesh, base.with_(u_d_nodal=st.u, y_d_nodal=st.y))
    return disc, ControlField(disc.zero_control(), lower, upper), Ustar
