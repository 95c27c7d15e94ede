"""Numerical oracles shared by the CLI check commands and the test-suite."""
import numpy as np

from .fem import forms
from .optimizer import (ControlField, cost_from_state, inner, l43_norm, reduced_cost,
                        reduced_gradient)
from .sensitivity import Sensitivity, duality_gap
from .state import NewtonOptions, solve_state

TIGHT = NewtonOptions(tol=1e-12)


def _fit_order(ts, errs):
    ts, errs = np.log(np.asarray(ts)), np.log(np.asarray(errs))
    return [float((errs[i] - errs[i + 1]) / (ts[i] - ts[i + 1])) for i in range(len(ts) - 1)]


def gradient_taylor_test(disc, U, n_dirs=5, ts=(1e-2, 1e-3, 1e-4), seed=0, h_scale=1.0,
                         opts=TIGHT):
    """Central differences of j against (grad, h) in L2.

    Returns a dict with per-direction relative errors at the smallest ``t``,
    the observed orders of the FD error and the worst values of both.
    """
    vals = U.values if isinstance(U, ControlField) else np.asarray(U, dtype=float)
    rng = np.random.default_rng(seed)
    j0, state, _ = reduced_cost(disc, vals, opts)
    adj = Sensitivity(disc, state).adjoint()
    g = reduced_gradient(disc, vals, adj)
    rows, rel_final, orders = [], [], []
    for i in range(n_dirs):
        h = h_scale * rng.standard_normal(vals.shape)
        dj = inner(disc.area, g, h)
        errs = []
        for t in ts:
            jp, _, _ = reduced_cost(disc, vals + t * h, opts, initial=state)
            jm, _, _ = reduced_cost(disc, vals - t * h, opts, initial=state)
            fd = (jp - jm) / (2 * t)
            errs.append(abs(fd - dj))
            rows.append((i, t, fd, dj, abs(fd - dj) / abs(dj)))
        rel_final.append(errs[-1] / abs(dj))
        orders.append(min(_fit_order(ts, errs)))
    return {"rows": rows, "rel_error": rel_final, "max_rel_error": max(rel_final),
            "orders": orders, "min_order": min(orders)}


def _h1_pair(disc, du, dy):
    return disc.h1(du) + disc.h1(dy)


def linearization_order_test(disc, U, h, ts=(1e-2, 1e-3, 1e-4), opts=TIGHT):
    """|G(U + t h) - G(U) - t (zeta, mu)|_1 for each t, with observed orders."""
    vals = np.asarray(U, dtype=float)
    state, _ = solve_state(disc, vals, opts)
    lin = Sensitivity(disc, state).linearized(h)
    rem = []
    for t in ts:
        st, _ = solve_state(disc, vals + t * h, opts, initial=state)
        rem.append(_h1_pair(disc, st.u - state.u - t * lin.zeta, st.y - state.y - t * lin.mu))
    return {"t": list(ts), "remainder": rem, "orders": _fit_order(ts, rem)}


def duality_test(disc, state, n_dirs=10, seed=0):
    """Relative errors of (zeta, u - u_d) + (mu, y - y_d) = (h, phi) for random h."""
    rng = np.random.default_rng(seed)
    sens = Sensitivity(disc, state)
    adj = sens.adjoint()
    out = []
    for _ in range(n_dirs):
        h = rng.standard_normal((disc.mesh.num_triangles, 2))
        lhs, rhs = duality_gap(disc, state, adj, sens.linearized(h), h)
        out.append((lhs, rhs, abs(lhs - rhs) / max(abs(rhs), 1e-300)))
    return out


def stability_ratios(disc, U, h, scales=(1.0, 1e-1, 1e-2, 1e-3), opts=TIGHT):
    """(|u1 - u2|_1 + |y1 - y2|_1) / |U1 - U2|_{4/3} with U2 = U1 + s h."""
    vals = np.asarray(U, dtype=float)
    s1, _ = solve_state(disc, vals, opts)
    out = []
    for s in scales:
        s2, _ = solve_state(disc, vals + s * h, opts, initial=s1)
        num = _h1_pair(disc, s2.u - s1.u, s2.y - s1.y)
        out.append((s, num / l43_norm(disc.area, s * h)))
    return out


def skew_values(disc, w, v, s):
    """Return (c~(w, v, v), c~_y(w, s, s), scale) for discrete fields."""
    C = forms.assemble_c_skew(w, disc.V)
    Cy = forms.assemble_cy_skew(w, disc.Y, disc.V)
    scale = (np.abs(w).max() * (v @ (disc.K @ v) + v @ (disc.M @ v))
             + np.abs(w).max() * (s @ (disc.K @ s) + s @ (disc.M @ s)))
    return float(v @ (C @ v)), float(s @ (Cy @ s)), float(scale)


def cost_at(disc, U, opts=TIGHT):
    j, _, _ = reduced_cost(disc, U, opts)
    return j


__all__ = ["gradient_taylor_test", "linearization_order_test", "duality_test",
           "stability_ratios", "skew_values", "cost_at", "cost_from_state"]
