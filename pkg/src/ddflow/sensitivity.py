"""Linearized (control-to-state derivative) and adjoint solves.

Both solves share one factorization of the constrained state Jacobian; the
adjoint uses its transpose. :func:`assemble_adjoint_operator` builds the
adjoint system form by form, without reference to the Jacobian, so that
:func:`check_transpose_consistency` compares two independent assemblies.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .discretization import StateFields
from .fem import forms
from .linalg import Factorization, SolverError, as_csr
from .state import constrain, field_at_quad, newton_jacobian


class SensitivityError(RuntimeError):
    """The linearized or adjoint system could not be solved."""


@dataclass
class LinearizedFields:
    zeta: np.ndarray     # P2 velocity direction
    mu: np.ndarray       # scalar pair direction
    pressure: np.ndarray  # P1 multiplier of the divergence constraint


@dataclass
class AdjointFields:
    phi: np.ndarray
    xi: np.ndarray
    eta: np.ndarray


class Sensitivity:
    """Factorized Jacobian at a state, reused for linearized and adjoint solves.

    Parameters
    ----------
    disc : Discretization
    state : StateFields
        A solved state.
    tol : float
        Relative residual tolerance of each linear solve.
    """

    def __init__(self, disc, state, tol=1e-10):
        self.disc = disc
        self.state = state
        self.tol = tol
        self.jacobian = newton_jacobian(disc, state)
        try:
            self._lu = Factorization(constrain(disc, self.jacobian))
        except SolverError as exc:
            raise SensitivityError(
                f"state Jacobian is singular ({exc}); retry with continuation "
                "or smaller data") from exc

    def _solve(self, rhs, trans):
        rhs = rhs.copy()
        rhs[self.disc.constrained] = 0.0
        try:
            return self._lu.solve(rhs, tol=self.tol, trans=trans)
        except SolverError as exc:
            raise SensitivityError(f"sensitivity solve failed: {exc}") from exc

    def linearized(self, h):
        """Solve J (zeta, ., mu, .) = (M_U h, 0, 0, 0) for a cellwise direction ``h``."""
        d = self.disc
        rhs = np.zeros(d.size)
        rhs[d.su] = d.control_load(h)
        x = self._solve(rhs, trans=False)
        return LinearizedFields(x[d.su].copy(), x[d.sy].copy(), x[d.sp_].copy())

    def adjoint_rhs(self):
        d, st = self.disc, self.state
        rhs = np.zeros(d.size)
        rhs[d.su] = d.M @ (st.u - d.u_d)
        rhs[d.sy] = d.M @ (st.y - d.y_d)
        return rhs

    def adjoint(self):
        d = self.disc
        x = self._solve(self.adjoint_rhs(), trans=True)
        return AdjointFields(x[d.su].copy(), x[d.sp_].copy(), x[d.sy].copy())


def solve_linearized(disc, state, h, tol=1e-10):
    """Derivative (zeta, mu) of the control-to-state map at ``state`` in direction ``h``."""
    return Sensitivity(disc, state, tol).linearized(np.asarray(h, dtype=float))


def solve_adjoint(disc, state, tol=1e-10):
    """Adjoint fields (phi, xi, eta) with right-hand sides M(u - u_d), M(y - y_d)."""
    return Sensitivity(disc, state, tol).adjoint()


# -- independent adjoint assembly ------------------------------------------------

def _transport_first_slot(test_space, adj_space, z_vals, z_grads):
    """Rows psi (test), columns phi: c~(psi, z, phi) = 1/2[(psi.grad z, phi) - (psi.grad phi, z)]."""
    w = forms.weights(test_space)
    psi = forms.vals(test_space)
    blocks = [[None, None], [None, None]]
    for l in range(2):          # component of psi
        for k in range(2):      # component of phi
            a = forms.scalar_block(test_space, adj_space, 0.5 * w * z_grads[k][..., l],
                                   psi, forms.vals(adj_space))
            b = forms.scalar_block(test_space, adj_space, 0.5 * w * z_vals[k],
                                   psi, forms.dx(adj_space, l))
            blocks[l][k] = a - b
    return forms.block_matrix(blocks)


def _transport_second_slot(test_space, adj_space, wx, wy):
    """Rows psi, columns phi: 1/2[((w.grad) psi, phi) - ((w.grad) phi, psi)], per component."""
    w = forms.weights(test_space)
    adv_test = wx[..., None] * forms.dx(test_space, 0) + wy[..., None] * forms.dx(test_space, 1)
    adv_adj = wx[..., None] * forms.dx(adj_space, 0) + wy[..., None] * forms.dx(adj_space, 1)
    blk = 0.5 * (forms.scalar_block(test_space, adj_space, w, adv_test, forms.vals(adj_space))
                 - forms.scalar_block(test_space, adj_space, w, forms.vals(test_space), adv_adj))
    Z = sp.csr_matrix(blk.shape)
    return forms.block_matrix([[blk, Z], [Z, blk]])


def assemble_adjoint_operator(disc, state):
    """Adjoint system matrix; rows are test directions (psi, q, chi, r), columns (phi, xi, eta, rho).

    Velocity rows:  a(T; psi, phi) + c~(psi, u, phi) + c~(u, psi, phi) + b(psi, xi)
                    + c~_y(psi, y, eta)
    Pressure rows:  b(phi, q) + rho (q, 1)
    Pair rows:      (nu_T(T) chi^T grad u, grad phi) - (F_y(y) chi, phi)
                    + (D grad chi, grad eta) + c~_y(u, chi, eta)
    """
    d = disc
    V, Q, Y, P2 = d.V, d.Q, d.Y, d.P2
    n = d.n2
    model = d.model
    T = state.T
    uv, ug = field_at_quad(P2, state.u, n)
    yv, yg = field_at_quad(P2, state.y, n)
    wq = forms.weights(V)

    A = forms.assemble_a(V, T, model)   # symmetric: Kinv symmetric, scalar viscosity
    uu = A + _transport_first_slot(V, V, uv, ug) + _transport_second_slot(V, V, uv[0], uv[1])
    uxi = sp.vstack([forms.scalar_block(V, Q, -wq, forms.dx(V, k), forms.vals(Q))
                     for k in range(2)])
    ueta = _transport_first_slot(V, Y, yv, yg)
    qphi = sp.hstack([forms.scalar_block(Q, V, -wq, forms.vals(Q), forms.dx(V, k))
                      for k in range(2)])

    nuT = model.viscosity.nu_T(P2.evaluate(T))
    Fy = model.buoyancy.F_y(*forms.pair_at_quad(Y, state.y))
    yphi = [[None, None], [None, None]]
    for l in range(2):
        for k in range(2):
            blk = forms.scalar_block(Y, V, -wq * (np.asarray(Fy[k][l]) + 0 * wq),
                                     forms.vals(Y), forms.vals(V))
            if l == 0:
                grad_dot = (ug[k][..., 0][..., None] * forms.dx(V, 0)
                            + ug[k][..., 1][..., None] * forms.dx(V, 1))
                blk = blk + forms.scalar_block(Y, V, wq * nuT, forms.vals(Y), grad_dot)
            yphi[l][k] = blk
    D = np.asarray(model.D, dtype=float)
    K = forms.stiffness(Y)
    yeta = (forms.block_matrix([[D[k, l] * K for k in range(2)] for l in range(2)])
            + _transport_second_slot(Y, Y, uv[0], uv[1]))

    m = sp.csr_matrix(d.pmass[:, None])
    return forms.block_matrix([
        [uu, uxi, ueta, None],
        [qphi, None, None, m],
        [forms.block_matrix(yphi), None, yeta, None],
        [None, m.T, None, sp.csr_matrix((1, 1))],
    ])


def check_transpose_consistency(disc, state, rtol=1e-12):
    """Compare the independently assembled adjoint operator with J^T on free dofs.

    Returns a dict with the max deviation, the threshold, row/column counts
    and a ``passed`` flag.
    """
    if not isinstance(state, StateFields):
        state = disc.unpack(state)
    J = newton_jacobian(disc, state)
    Aadj = assemble_adjoint_operator(disc, state)
    free = disc.free
    Jt = as_csr(J.T)[free][:, free]
    Af = as_csr(Aadj)[free][:, free]
    diff = abs(Af - Jt)
    dev = float(diff.max()) if diff.nnz else 0.0
    scale = float(abs(J).max())
    return {"max_deviation": dev, "max_entry": scale, "threshold": rtol * scale,
            "passed": dev <= rtol * scale, "free_dofs": int(free.size),
            "constrained_dofs": int(disc.constrained.size), "size": int(disc.size)}


def duality_gap(disc, state, adjoint, lin, h):
    """Return (lhs, rhs) of (zeta, u - u_d) + (mu, y - y_d) = (h, phi)."""
    lhs = (lin.zeta @ (disc.M @ (state.u - disc.u_d))
           + lin.mu @ (disc.M @ (state.y - disc.y_d)))
    rhs = float(np.asarray(h, dtype=float).T.ravel() @ (disc.MU.T @ adjoint.phi))
    return float(lhs), rhs
