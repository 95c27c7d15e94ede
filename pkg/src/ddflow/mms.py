"""Manufactured solutions for the state system and convergence studies.

Sources are derived symbolically from the strong form

    Kinv u - div(nu(T) grad u) + (u . grad) u + grad p = F(y) + f_u,   div u = 0,
    -div(D grad y) + (u . grad) y = f_y,

so the discrete solution must converge to the chosen fields at the
approximation order of the element pair.
"""
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .discretization import Discretization
from .model import PhysicalModel, linear_buoyancy, tanh_viscosity
from .state import NewtonOptions, solve_state

X, Y = sp.symbols("x y")


def _default_fields():
    pi = sp.pi
    psi = sp.sin(pi * X) ** 2 * sp.sin(pi * Y) ** 2 / pi
    u = (sp.diff(psi, Y), -sp.diff(psi, X))
    p = sp.cos(pi * X) * sp.cos(pi * Y)
    T = X + sp.sin(pi * X) * sp.sin(pi * Y) / 2
    S = Y / 2 + sp.sin(2 * pi * X) * sp.sin(pi * Y) / 4
    return u, p, (T, S)


@dataclass
class ManufacturedProblem:
    """Exact fields (numpy callables), their gradients and the model with sources."""

    model: PhysicalModel
    u: callable
    grad_u: callable
    p: callable
    y: callable
    grad_y: callable


def _lambdify(exprs):
    f = sp.lambdify((X, Y), list(exprs), "numpy")

    def call(x, y):
        return tuple(np.broadcast_to(np.asarray(v, dtype=float), np.shape(x)) for v in f(x, y))
    return call


def manufactured_problem(nu0=1.0, gamma=0.5, g_T=1.0, g_S=0.5, D=((1.0, 0.1), (0.2, 1.0)),
                         Kinv=((1.0, 0.0), (0.0, 1.0)), lam=1.0):
    """Build the default manufactured problem; sources computed with sympy."""
    u, p, y = _default_fields()
    K = sp.Matrix(Kinv)
    Dm = sp.Matrix(D)
    nu = nu0 * (1 + gamma * sp.tanh(y[0]))
    grad = lambda f: (sp.diff(f, X), sp.diff(f, Y))   # noqa: E731
    fu = []
    for k in range(2):
        gk = grad(u[k])
        diffusion = -(sp.diff(nu * gk[0], X) + sp.diff(nu * gk[1], Y))
        convection = u[0] * gk[0] + u[1] * gk[1]
        reaction = K[k, 0] * u[0] + K[k, 1] * u[1]
        buoy = (0, g_T * y[0] + g_S * y[1])[k]
        fu.append(sp.simplify(reaction + diffusion + convection + grad(p)[k] - buoy))
    fy = []
    for k in range(2):
        flux = [sum(Dm[k, l] * grad(y[l])[c] for l in range(2)) for c in range(2)]
        div = sp.diff(flux[0], X) + sp.diff(flux[1], Y)
        gk = grad(y[k])
        fy.append(sp.simplify(-div + u[0] * gk[0] + u[1] * gk[1]))

    y_exact = _lambdify(y)
    model = PhysicalModel(Kinv=np.array(Kinv, dtype=float), D=np.array(D, dtype=float),
                          viscosity=tanh_viscosity(nu0, gamma),
                          buoyancy=linear_buoyancy(g_T, g_S), lam=lam,
                          yD=y_exact, f_u=_lambdify(fu), f_y=_lambdify(fy))
    return ManufacturedProblem(
        model=model, u=_lambdify(u),
        grad_u=_lambdify([d for k in range(2) for d in grad(u[k])]),
        p=_lambdify([p]), y=y_exact,
        grad_y=_lambdify([d for k in range(2) for d in grad(y[k])]))


def _pair_errors(disc, vec, exact, grad_exact):
    xq = disc.geometry.xq
    w = disc.geometry.wdet
    n = disc.n2
    ev = exact(xq[..., 0], xq[..., 1])
    eg = grad_exact(xq[..., 0], xq[..., 1])
    l2 = h1s = 0.0
    for k in range(2):
        c = vec[k * n:(k + 1) * n]
        l2 += np.sum(w * (disc.P2.evaluate(c) - ev[k]) ** 2)
        g = disc.P2.evaluate_grad(c)
        h1s += np.sum(w * ((g[..., 0] - eg[2 * k]) ** 2 + (g[..., 1] - eg[2 * k + 1]) ** 2))
    return float(np.sqrt(l2)), float(np.sqrt(l2 + h1s))


def state_errors(disc, state, prob):
    """L2/H1 errors of velocity and scalars, L2 error of pressure."""
    u_l2, u_h1 = _pair_errors(disc, state.u, prob.u, prob.grad_u)
    y_l2, y_h1 = _pair_errors(disc, state.y, prob.y, prob.grad_y)
    xq = disc.geometry.xq
    pe = disc.Q.evaluate(state.p) - prob.p(xq[..., 0], xq[..., 1])[0]
    p_l2 = float(np.sqrt(np.sum(disc.geometry.wdet * pe ** 2)))
    return {"u_l2": u_l2, "u_h1": u_h1, "p_l2": p_l2, "y_l2": y_l2, "y_h1": y_h1}


def observed_orders(ns, errors):
    """Rates log(e_i / e_{i+1}) / log(n_{i+1} / n_i) for each error key."""
    keys = errors[0].keys()
    return [{k: float(np.log(a[k] / b[k]) / np.log(n2 / n1)) for k in keys}
            for n1, n2, a, b in zip(ns, ns[1:], errors, errors[1:])]


def convergence_study(ns=(8, 16, 32), prob=None, opts=None):
    """Solve the manufactured problem on each mesh; return (errors, orders)."""
    prob = prob or manufactured_problem()
    opts = opts or NewtonOptions()
    errors = []
    for n in ns:
        disc = Discretization(int(n), prob.model)
        state, _ = solve_state(disc, None, opts)
        errors.append(state_errors(disc, state, prob))
    return errors, observed_orders(list(ns), errors)
