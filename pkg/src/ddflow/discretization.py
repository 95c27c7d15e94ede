"""Discrete problem layout: spaces, constant operators and the unknown vector.

The unknown vector is ``[u_x, u_y, p, T, S, rho]`` where ``rho`` is the
Lagrange multiplier enforcing the zero-mean pressure constraint.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import forms
from .fem.mesh import build_unit_square_mesh
from .fem.spaces import (Geometry, control_space, pair_space, pressure_space, scalar_space,
                         velocity_space)


@dataclass
class StateFields:
    """Velocity (P2 vector), zero-mean pressure (P1) and the pair y = (T, S) (P2)."""

    u: np.ndarray
    p: np.ndarray
    T: np.ndarray
    S: np.ndarray
    rho: float = 0.0

    @property
    def y(self):
        return np.concatenate([self.T, self.S])

    def copy(self):
        return StateFields(self.u.copy(), self.p.copy(), self.T.copy(), self.S.copy(),
                           self.rho)


class Discretization:
    """Everything that depends on the mesh and the model but not on the state."""

    def __init__(self, mesh, model, degree=6):
        if isinstance(mesh, int):
            mesh = build_unit_square_mesh(mesh)
        self.mesh = mesh
        self.model = model
        self.geometry = Geometry(mesh, degree)
        g = self.geometry
        self.V = velocity_space(mesh, g)
        self.Q = pressure_space(mesh, g)
        self.Y = pair_space(mesh, g)
        self.P2 = scalar_space(mesh, g)
        self.C = control_space(mesh, g)

        self.n2 = self.P2.n_scalar
        self.nu_ = 2 * self.n2
        self.np_ = self.Q.n_scalar
        self.ny = 2 * self.n2
        self.su = slice(0, self.nu_)
        self.sp_ = slice(self.nu_, self.nu_ + self.np_)
        self.sy = slice(self.nu_ + self.np_, self.nu_ + self.np_ + self.ny)
        self.irho = self.nu_ + self.np_ + self.ny
        self.size = self.irho + 1

        self.B = forms.assemble_b(self.V, self.Q)
        self.Ay = forms.assemble_ay(self.Y, model)
        m2 = forms.mass(self.P2)
        k2 = forms.stiffness(self.P2)
        Z = sp.csr_matrix(m2.shape)
        self.M2, self.K2 = m2, k2
        self.M = forms.block_matrix([[m2, Z], [Z, m2]])   # velocity / pair mass
        self.K = forms.block_matrix([[k2, Z], [Z, k2]])   # velocity / pair stiffness
        self.MU = forms.control_matrix(self.V, self.C)
        self.area = self.geometry.area
        self.pmass = forms.scalar_vector(self.Q, forms.weights(self.Q), forms.vals(self.Q))

        bmask = self.P2.scalar_boundary_mask
        bnd = np.flatnonzero(bmask)
        self.boundary_scalar = bnd
        self.free_scalar = np.flatnonzero(~bmask)
        self.u_dofs_bnd = np.concatenate([bnd, bnd + self.n2])
        self.y_dofs_bnd = self.u_dofs_bnd.copy()
        self.constrained = np.concatenate([self.u_dofs_bnd,
                                           self.sy.start + self.y_dofs_bnd])
        mask = np.zeros(self.size, dtype=bool)
        mask[self.constrained] = True
        self.constrained_mask = mask
        self.free = np.flatnonzero(~mask)

        self.yD = self.Y.interpolate(model.yD)
        self.y_lift = forms.apply_lifting(self.Y, self.yD)
        self.u_d = (model.u_d_nodal if model.u_d_nodal is not None
                    else self.V.interpolate(model.u_d))
        self.y_d = (model.y_d_nodal if model.y_d_nodal is not None
                    else self.Y.interpolate(model.y_d))
        xq, yq = self.geometry.xq[..., 0], self.geometry.xq[..., 1]
        self.f_u = (forms.load(self.V, model.f_u(xq, yq)) if model.f_u is not None
                    else np.zeros(self.nu_))
        self.f_y = (forms.load(self.Y, model.f_y(xq, yq)) if model.f_y is not None
                    else np.zeros(self.ny))

    # -- packing -------------------------------------------------------------

    def pack(self, state):
        x = np.zeros(self.size)
        x[self.su] = state.u
        x[self.sp_] = state.p
        x[self.sy] = state.y
        x[self.irho] = state.rho
        return x

    def unpack(self, x):
        y = x[self.sy]
        return StateFields(x[self.su].copy(), x[self.sp_].copy(), y[:self.n2].copy(),
                           y[self.n2:].copy(), float(x[self.irho]))

    def initial_state(self):
        """Zero fields plus the harmonic lifting of the boundary data."""
        y = self.y_lift
        return StateFields(np.zeros(self.nu_), np.zeros(self.np_), y[:self.n2].copy(),
                           y[self.n2:].copy())

    def zero_control(self):
        return np.zeros((self.mesh.num_triangles, 2))

    def control_load(self, U):
        """Load vector (U, v) for a cellwise control of shape (nt, 2)."""
        return self.MU @ np.asarray(U, dtype=float).T.ravel()

    def control_pairing(self, phi):
        """Cellwise integrals int_e phi_k, shape (nt, 2)."""
        return (self.MU.T @ phi).reshape(2, -1).T

    # -- norms -----------------------------------------------------------------

    def l2(self, v):
        """L2 norm of a P2 vector/pair field."""
        return float(np.sqrt(max(v @ (self.M @ v), 0.0)))

    def h1(self, v):
        return float(np.sqrt(max(v @ (self.M @ v) + v @ (self.K @ v), 0.0)))

    def pressure_mean(self, p):
        return float(self.pmass @ p)
