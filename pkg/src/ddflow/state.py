"""Nonlinear state solve: damped Newton with a Picard fallback and continuation."""
from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.sparse as sp

from .discretization import StateFields
from .fem import forms
from .linalg import Factorization, LinearSystem, SolverError, as_csr

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    """Newton did not converge; ``report`` holds the iteration history."""

    def __init__(self, message, report, state=None):
        super().__init__(message)
        self.report = report
        self.state = state


@dataclass
class NewtonReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)   # (total, u, p, y) per evaluation
    damping: list = field(default_factory=list)
    picard_steps: int = 0
    converged: bool = False

    def history_rows(self):
        damp = [1.0] + list(self.damping)
        return [(k, r[0], damp[k] if k < len(damp) else float("nan"))
                for k, r in enumerate(self.residuals)]


@dataclass
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 30
    max_halvings: int = 10
    picard_steps: int = 5
    linear_tol: float = 1e-8


# -- residual and Jacobian ---------------------------------------------------

def _fields(disc, x):
    u = x[disc.su]
    p = x[disc.sp_]
    y = x[disc.sy]
    return u, p, y, x[disc.irho]


def residual(disc, x, U, scale=1.0):
    """Residual of the discrete state system; zero on Dirichlet rows.

    ``scale`` multiplies buoyancy, control and volume sources (continuation).
    """
    model = disc.model
    u, p, y, rho = _fields(disc, x)
    T = y[:disc.n2]
    A = forms.assemble_a(disc.V, T, model)
    C = forms.assemble_c_skew(u, disc.V)
    Cy = forms.assemble_cy_skew(u, disc.Y, disc.V)
    F = forms.assemble_buoyancy(y, model, disc.Y, disc.V, mode="value")
    R = np.empty(disc.size)
    R[disc.su] = (A @ u + C @ u + disc.B.T @ p
                  - scale * (F + disc.control_load(U) + disc.f_u))
    R[disc.sp_] = disc.B @ u + disc.pmass * rho
    R[disc.sy] = disc.Ay @ y + Cy @ y - scale * disc.f_y
    R[disc.irho] = disc.pmass @ p
    R[disc.constrained] = 0.0
    return R


def residual_norms(disc, R):
    return (float(np.linalg.norm(R)), float(np.linalg.norm(R[disc.su])),
            float(np.linalg.norm(np.append(R[disc.sp_], R[disc.irho]))),
            float(np.linalg.norm(R[disc.sy])))


def transport_derivative(test_space, trial_space, z_vals, z_grads):
    """Matrix of psi -> c~(psi, z, s) for a two-component field ``z``.

    Block (k, l): 1/2 [ (psi_l d_l z_k, s_k) - (psi_l d_l s_k, z_k) ].
    """
    w = forms.weights(test_space)
    phi_s = forms.vals(test_space)
    phi_t = forms.vals(trial_space)
    blocks = [[None, None], [None, None]]
    for k in range(2):
        for l in range(2):
            a = forms.scalar_block(test_space, trial_space, 0.5 * w * z_grads[k][..., l],
                                   phi_s, phi_t)
            b = forms.scalar_block(test_space, trial_space, 0.5 * w * z_vals[k],
                                   forms.dx(test_space, l), phi_t)
            blocks[k][l] = a - b
    return forms.block_matrix(blocks)


def viscosity_coupling(disc, u, T):
    """Matrix of chi^T -> (nu_T(T) chi^T grad u, grad v); columns on the pair space."""
    V = disc.V
    nuT = disc.model.viscosity.nu_T(disc.P2.evaluate(T))
    w = forms.weights(V, nuT)
    n = disc.n2
    blocks = [[None, None], [None, None]]
    for k in range(2):
        gk = V.evaluate_grad(u[k * n:(k + 1) * n])
        test = forms.dx(V, 0) * gk[..., 0][..., None] + forms.dx(V, 1) * gk[..., 1][..., None]
        blocks[k][0] = forms.scalar_block(V, disc.Y, w, test, forms.vals(disc.Y))
        blocks[k][1] = sp.csr_matrix((n, n))
    return forms.block_matrix(blocks)


def field_at_quad(space, vec, n):
    vals = [space.evaluate(vec[k * n:(k + 1) * n]) for k in range(2)]
    grads = [space.evaluate_grad(vec[k * n:(k + 1) * n]) for k in range(2)]
    return vals, grads


def jacobian_blocks(disc, x, scale=1.0):
    """Return the Jacobian of :func:`residual` as a dict of named blocks."""
    model = disc.model
    u, p, y, _ = _fields(disc, x)
    n = disc.n2
    T = y[:n]
    uv, ug = field_at_quad(disc.P2, u, n)
    yv, yg = field_at_quad(disc.P2, y, n)
    A = forms.assemble_a(disc.V, T, model)
    C = forms.assemble_c_skew(u, disc.V)
    Cy = forms.assemble_cy_skew(u, disc.Y, disc.V)
    return {
        "uu": as_csr(A + C + transport_derivative(disc.V, disc.V, uv, ug)),
        "uy": as_csr(viscosity_coupling(disc, u, T)
                     - scale * forms.assemble_buoyancy(y, model, disc.Y, disc.V,
                                                       mode="jacobian")),
        "yu": transport_derivative(disc.Y, disc.V, yv, yg),
        "yy": as_csr(disc.Ay + Cy),
    }


def assemble_jacobian(disc, blocks):
    m = sp.csr_matrix(disc.pmass[:, None])
    return forms.block_matrix([
        [blocks["uu"], disc.B.T, blocks["uy"], None],
        [disc.B, None, None, m],
        [blocks["yu"], None, blocks["yy"], None],
        [None, m.T, None, sp.csr_matrix((1, 1))],
    ])


def newton_jacobian(disc, state, scale=1.0):
    """Unconstrained Jacobian of the state residual at ``state``."""
    x = disc.pack(state) if isinstance(state, StateFields) else state
    return assemble_jacobian(disc, jacobian_blocks(disc, x, scale))


def constrain(disc, J):
    """Identity rows and columns on Dirichlet dofs."""
    sysm = LinearSystem(J, np.zeros(J.shape[0]), disc.constrained, 0.0)
    return sysm.constrained_form()[0]


# -- Newton --------------------------------------------------------------------

def _picard_matrix(disc, x, scale):
    blocks = jacobian_blocks(disc, x, scale)
    u, p, y, _ = _fields(disc, x)
    A = forms.assemble_a(disc.V, y[:disc.n2], disc.model)
    C = forms.assemble_c_skew(u, disc.V)
    blocks["uu"] = as_csr(A + C)
    blocks["uy"] = as_csr(-scale * forms.assemble_buoyancy(y, disc.model, disc.Y, disc.V,
                                                           mode="jacobian"))
    blocks["yu"] = sp.csr_matrix(blocks["yu"].shape)
    return assemble_jacobian(disc, blocks)


def _step(disc, J, R, opts):
    Jc = constrain(disc, J)
    rhs = -R.copy()
    rhs[disc.constrained] = 0.0
    return Factorization(Jc).solve(rhs, tol=opts.linear_tol)


def newton(disc, x0, U, opts=None, scale=1.0):
    """Damped Newton on the constrained residual; returns (x, report)."""
    opts = opts or NewtonOptions()
    rep = NewtonReport()
    x = x0.copy()
    R = residual(disc, x, U, scale)
    norms = residual_norms(disc, R)
    rep.residuals.append(norms)
    picard_done = False
    while norms[0] > opts.tol:
        if rep.iterations >= opts.max_iter:
            raise NewtonError(f"Newton did not converge in {opts.max_iter} iterations "
                              f"(residual {norms[0]:.3e})", rep, disc.unpack(x))
        J = newton_jacobian(disc, x, scale)
        try:
            dx = _step(disc, J, R, opts)
        except SolverError as exc:
            raise NewtonError(f"linear solve failed: {exc}", rep, disc.unpack(x)) from exc
        alpha = 1.0
        xt = x + dx
        Rt = residual(disc, xt, U, scale)
        nt = residual_norms(disc, Rt)
        if nt[0] >= norms[0] and rep.iterations < 2 and not picard_done:
            # undamped Newton diverged early: a few Picard sweeps, then resume
            picard_done = True
            xp, Rp, np_ = _picard(disc, x, U, opts, scale, rep)
            if np_[0] < norms[0]:
                x, R, norms = xp, Rp, np_
                rep.iterations += 1
                rep.damping.append(0.0)
                rep.residuals.append(norms)
                continue
        halvings = 0
        while nt[0] >= norms[0]:
            if halvings == opts.max_halvings:
                raise NewtonError("damping failed to reduce the residual", rep,
                                  disc.unpack(x))
            alpha *= 0.5
            halvings += 1
            xt = x + alpha * dx
            Rt = residual(disc, xt, U, scale)
            nt = residual_norms(disc, Rt)
        x, R, norms = xt, Rt, nt
        rep.iterations += 1
        rep.damping.append(alpha)
        rep.residuals.append(norms)
    rep.converged = True
    return x, rep


def _picard(disc, x, U, opts, scale, rep):
    R = residual(disc, x, U, scale)
    for _ in range(opts.picard_steps):
        P = _picard_matrix(disc, x, scale)
        x = x + _step(disc, P, R, opts)
        R = residual(disc, x, U, scale)
        rep.picard_steps += 1
    return x, R, residual_norms(disc, R)


def solve_state(disc, U=None, opts=None, initial=None, scale=1.0):
    """Solve the coupled state system for the cellwise control ``U``.

    Returns ``(StateFields, NewtonReport)``; raises :class:`NewtonError`.
    """
    U = disc.zero_control() if U is None else np.asarray(U, dtype=float)
    state0 = initial if initial is not None else disc.initial_state()
    x0 = disc.pack(state0)
    # Dirichlet values always come from the lifting
    x0[disc.sy.start + disc.y_dofs_bnd] = disc.y_lift[disc.y_dofs_bnd]
    x0[disc.u_dofs_bnd] = 0.0
    x, rep = newton(disc, x0, U, opts, scale)
    return disc.unpack(x), rep


def continuation_solve(disc, U=None, ramp=(0.25, 0.5, 0.75, 1.0), opts=None):
    """Ramp buoyancy, control and sources from ``ramp[0]`` to 1.

    Returns ``(state, reports)``; on failure raises :class:`NewtonError` whose
    ``state`` is the last converged stage.
    """
    ramp = [float(s) for s in ramp]
    if not ramp or ramp[-1] != 1.0 or any(b <= a for a, b in zip(ramp, ramp[1:])) \
            or ramp[0] < 0:
        raise ValueError("ramp must be increasing in [0, 1] and end at 1")
    state, reports = None, []
    for s in ramp:
        try:
            state, rep = solve_state(disc, U, opts, initial=state, scale=s)
        except NewtonError as exc:
            raise NewtonError(f"continuation failed at stage {s}: {exc}", exc.report,
                              state) from exc
        reports.append((s, rep))
    return state, reports
