"""Lagrange P2/P1 and piecewise-constant spaces on a :class:`TriMesh`."""
from functools import cached_property

import numpy as np

from .quadrature import rule

P2, P1, P0 = "P2", "P1", "P0"


def _p2_values(L):
    L0, L1, L2 = L[..., 0], L[..., 1], L[..., 2]
    return np.stack([L0 * (2 * L0 - 1), L1 * (2 * L1 - 1), L2 * (2 * L2 - 1),
                     4 * L0 * L1, 4 * L1 * L2, 4 * L2 * L0], axis=-1)


def _p2_ref_grads(L):
    """d/dx, d/dy on the reference element; returns (..., 6, 2)."""
    L0, L1, L2 = L[..., 0], L[..., 1], L[..., 2]
    dL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    c = [4 * L0 - 1, 4 * L1 - 1, 4 * L2 - 1]
    g = [c[0][..., None] * dL[0], c[1][..., None] * dL[1], c[2][..., None] * dL[2],
         4 * (L0[..., None] * dL[1] + L1[..., None] * dL[0]),
         4 * (L1[..., None] * dL[2] + L2[..., None] * dL[1]),
         4 * (L2[..., None] * dL[0] + L0[..., None] * dL[2])]
    return np.stack(g, axis=-2)


def _p1_ref_grads(L):
    dL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.broadcast_to(dL, L.shape[:-1] + (3, 2))


class Geometry:
    """Affine maps and quadrature data for every triangle of a mesh."""

    def __init__(self, mesh, degree=6):
        self.mesh = mesh
        self.quad = rule(degree)
        p = mesh.vertices[mesh.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # (ne, 2, 2)
        self.det = np.linalg.det(J)
        self.Jinv = np.linalg.inv(J)
        self.area = 0.5 * np.abs(self.det)
        L = self.quad.points
        self.xq = np.einsum("qk,ekd->eqd", L, p)
        self.wdet = np.abs(self.det)[:, None] * self.quad.weights[None, :]

    def physical(self, ref_grads):
        """Map reference gradients (nq, nloc, 2) to (ne, nq, nloc, 2)."""
        return np.einsum("qid,edk->eqik", ref_grads, self.Jinv)


class FESpace:
    """A scalar Lagrange family replicated over ``ncomp`` components.

    Global numbering is component-major: dof ``c * n_scalar + k``.
    """

    def __init__(self, mesh, family, ncomp=1, zero_mean=False, geometry=None):
        if family not in (P2, P1, P0):
            raise ValueError(f"unknown family {family!r}")
        self.mesh = mesh
        self.family = family
        self.ncomp = ncomp
        self.zero_mean = zero_mean
        self.geometry = geometry if geometry is not None else Geometry(mesh)

    @property
    def kind(self):
        if self.family == P2:
            return "P2-vector" if self.ncomp == 2 and not self._is_pair else "P2-scalar"
        if self.family == P1:
            return "P1-scalar-zero-mean" if self.zero_mean else "P1-scalar"
        return "P0-per-cell-vector" if self.ncomp > 1 else "P0"

    _is_pair = False

    @cached_property
    def n_scalar(self):
        m = self.mesh
        return {P2: m.num_vertices + m.num_edges, P1: m.num_vertices,
                P0: m.num_triangles}[self.family]

    @property
    def dof_count(self):
        return self.n_scalar * self.ncomp

    @cached_property
    def cell_dofs(self):
        """(nt, nloc) scalar dof indices per triangle."""
        m = self.mesh
        if self.family == P2:
            return np.hstack([m.triangles, m.num_vertices + m.tri_edges])
        if self.family == P1:
            return m.triangles.copy()
        return np.arange(m.num_triangles)[:, None]

    @cached_property
    def dof_coordinates(self):
        m = self.mesh
        if self.family == P2:
            return np.vstack([m.vertices, m.vertices[m.edges].mean(axis=1)])
        if self.family == P1:
            return m.vertices.copy()
        return m.centroids()

    @cached_property
    def scalar_boundary_mask(self):
        m = self.mesh
        if self.family == P2:
            return np.concatenate([m.boundary_vertex_mask(), m.boundary_edge_mask()])
        return np.zeros(self.n_scalar, dtype=bool)

    @property
    def dirichlet_mask(self):
        return np.tile(self.scalar_boundary_mask, self.ncomp)

    @cached_property
    def values(self):
        """Basis values at quadrature points, shape (nq, nloc)."""
        L = self.geometry.quad.points
        if self.family == P2:
            return _p2_values(L)
        if self.family == P1:
            return L.copy()
        return np.ones((L.shape[0], 1))

    @cached_property
    def grads(self):
        """Physical basis gradients, shape (ne, nq, nloc, 2)."""
        L = self.geometry.quad.points
        if self.family == P2:
            return self.geometry.physical(_p2_ref_grads(L))
        if self.family == P1:
            return self.geometry.physical(_p1_ref_grads(L))
        return np.zeros((self.mesh.num_triangles, L.shape[0], 1, 2))

    def component(self, vec, c):
        return vec[c * self.n_scalar:(c + 1) * self.n_scalar]

    def evaluate(self, coeffs):
        """Values of a scalar field at quadrature points, (ne, nq)."""
        local = np.asarray(coeffs)[self.cell_dofs]
        return local @ self.values.T

    def evaluate_grad(self, coeffs):
        """Gradient of a scalar field at quadrature points, (ne, nq, 2)."""
        local = np.asarray(coeffs)[self.cell_dofs]
        return np.einsum("ei,eqid->eqd", local, self.grads)

    def interpolate(self, func):
        """Nodal interpolant of ``func(x, y)`` (scalar or ncomp-tuple)."""
        x, y = self.dof_coordinates.T
        vals = func(x, y)
        if self.ncomp == 1:
            return np.broadcast_to(np.asarray(vals, dtype=float), x.shape).copy()
        return np.concatenate([np.broadcast_to(np.asarray(v, dtype=float), x.shape)
                               for v in vals])


def velocity_space(mesh, geometry=None):
    return FESpace(mesh, P2, 2, geometry=geometry)


def pressure_space(mesh, geometry=None):
    return FESpace(mesh, P1, 1, zero_mean=True, geometry=geometry)


def scalar_space(mesh, geometry=None):
    return FESpace(mesh, P2, 1, geometry=geometry)


def pair_space(mesh, geometry=None):
    space = FESpace(mesh, P2, 2, geometry=geometry)
    space._is_pair = True
    return space


def control_space(mesh, geometry=None):
    return FESpace(mesh, P0, 2, geometry=geometry)
