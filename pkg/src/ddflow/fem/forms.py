"""Assembly of the bilinear and trilinear forms of the state system.

Every operator is a block matrix built from scalar P2/P1 blocks of the form
``sum_q w_q c(x_q) A_i(x_q) B_j(x_q)``; the element contraction runs through
:mod:`ddflow.kernels`. Vector fields are stored component-major.
"""
import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..linalg import as_csr, solve, LinearSystem
from ..model import ModelError

_PATTERNS = {}


def _pattern(test_dofs, trial_dofs, n_test, n_trial):
    """CSR sparsity pattern plus the position of every local entry in it."""
    key = (id(test_dofs), id(trial_dofs), n_test, n_trial)
    hit = _PATTERNS.get(key)
    if hit is not None and hit[0] is test_dofs and hit[1] is trial_dofs:
        return hit[2], hit[3], hit[4]
    ne, ni = test_dofs.shape
    nj = trial_dofs.shape[1]
    rows = np.repeat(test_dofs, nj, axis=1).ravel()
    cols = np.tile(trial_dofs, (1, ni)).ravel()
    flat = rows.astype(np.int64) * n_trial + cols
    keys, pos = np.unique(flat, return_inverse=True)
    indptr = np.searchsorted(keys // n_trial, np.arange(n_test + 1)).astype(np.int64)
    indices = (keys % n_trial).astype(np.int64)
    pos = pos.astype(np.int64).ravel()
    _PATTERNS[key] = (test_dofs, trial_dofs, indptr, indices, pos)
    return indptr, indices, pos


def scalar_block(test_space, trial_space, wq, test_arr, trial_arr):
    """Assemble ``sum_e sum_q wq A_i B_j`` into an (n_test, n_trial) CSR block."""
    local = kernels.local_matrices(np.ascontiguousarray(wq), test_arr, trial_arr)
    n_test, n_trial = test_space.n_scalar, trial_space.n_scalar
    indptr, indices, pos = _pattern(test_space.cell_dofs, trial_space.cell_dofs,
                                    n_test, n_trial)
    data = kernels.scatter_add(pos, local.ravel(), indices.shape[0])
    return sp.csr_matrix((data, indices, indptr), shape=(n_test, n_trial))


def scalar_vector(space, wq, test_arr):
    local = kernels.local_vectors(np.ascontiguousarray(wq), test_arr)
    return kernels.scatter_add(space.cell_dofs.ravel().astype(np.int64), local.ravel(),
                               space.n_scalar)


def vals(space):
    """Basis values broadcast to (ne, nq, nloc)."""
    ne = space.mesh.num_triangles
    return np.broadcast_to(space.values, (ne,) + space.values.shape)


def dx(space, k):
    return space.grads[..., k]


def weights(space, coef=1.0):
    return space.geometry.wdet * coef


def block_matrix(blocks):
    return as_csr(sp.bmat(blocks, format="csr"))


# --- scalar building blocks -------------------------------------------------

def mass(space, coef=1.0):
    return scalar_block(space, space, weights(space, coef), vals(space), vals(space))


def stiffness(space, coef=1.0):
    w = weights(space, coef)
    return (scalar_block(space, space, w, dx(space, 0), dx(space, 0))
            + scalar_block(space, space, w, dx(space, 1), dx(space, 1)))


def advection(space, wx, wy):
    """N[i, j] = ((w . grad) phi_j, phi_i) for w given at quadrature points."""
    trial = wx[..., None] * dx(space, 0) + wy[..., None] * dx(space, 1)
    return scalar_block(space, space, weights(space), vals(space), trial)


def skew(N):
    return as_csr(0.5 * (N - N.T))


# --- field helpers ------------------------------------------------------------

def split(vec, n):
    return vec[:n], vec[n:2 * n]


def velocity_at_quad(space, w):
    n = space.n_scalar
    w1, w2 = split(w, n)
    return space.evaluate(w1), space.evaluate(w2)


def _kinv_at_quad(space, Kinv):
    K = np.asarray(Kinv, dtype=float)
    ne, nq = space.geometry.wdet.shape
    if K.ndim == 2:
        return np.broadcast_to(K[None, None], (ne, nq, 2, 2))
    return np.broadcast_to(K[:, None], (ne, nq, 2, 2))


# --- forms of the state system ---------------------------------------------

def assemble_a(space_u, T_field, model, scalar=None):
    """(Kinv u, v) + (nu(T) grad u, grad v) on the P2 velocity space.

    ``T_field`` holds P2 scalar coefficients; ``scalar`` is the P2 scalar
    space used to evaluate it (defaults to the velocity component space).
    """
    scalar = scalar or space_u
    T = scalar.evaluate(T_field)
    nu = model.viscosity.nu(T)
    if np.any(nu <= 0):
        raise ModelError("viscosity is non-positive at a quadrature point")
    K = _kinv_at_quad(space_u, model.Kinv)
    A = stiffness(space_u, nu)
    blocks = [[None, None], [None, None]]
    for k in range(2):
        for l in range(2):
            Kkl = K[..., k, l]
            blk = mass(space_u, Kkl) if np.any(Kkl != 0) else None
            if k == l:
                blk = A if blk is None else blk + A
            blocks[k][l] = blk if blk is not None else sp.csr_matrix(
                (space_u.n_scalar, space_u.n_scalar))
    return block_matrix(blocks)


def assemble_b(space_u, space_p):
    """Matrix of b(v, q) = -(q, div v); rows pressure, columns velocity."""
    if space_u.mesh is not space_p.mesh:
        raise ValueError("velocity and pressure spaces must share a mesh")
    w = -weights(space_u)
    Bx = scalar_block(space_p, space_u, w, vals(space_p), dx(space_u, 0))
    By = scalar_block(space_p, space_u, w, vals(space_p), dx(space_u, 1))
    return as_csr(sp.hstack([Bx, By]))


def assemble_c_skew(w, space_u):
    """Matrix C with v^T C u = 1/2[((w.grad)u, v) - ((w.grad)v, u)]."""
    wx, wy = velocity_at_quad(space_u, w)
    C = skew(advection(space_u, wx, wy))
    Z = sp.csr_matrix(C.shape)
    return block_matrix([[C, Z], [Z, C]])


def assemble_ay(space_y, model):
    """Matrix of (D grad y, grad s) on the scalar pair."""
    D = np.asarray(model.D, dtype=float)
    sym = 0.5 * (D + D.T)
    if np.linalg.eigvalsh(sym).min() <= 0:
        raise ModelError("D is not positive definite")
    K = stiffness(space_y)
    return block_matrix([[D[0, 0] * K, D[0, 1] * K], [D[1, 0] * K, D[1, 1] * K]])


def assemble_cy_skew(w, space_y, space_u=None):
    """Skew transport matrix for the scalar pair, advected by velocity ``w``."""
    space_u = space_u or space_y
    wx, wy = velocity_at_quad(space_u, w)
    C = skew(advection(space_y, wx, wy))
    Z = sp.csr_matrix(C.shape)
    return block_matrix([[C, Z], [Z, C]])


def pair_at_quad(space_y, y):
    n = space_y.n_scalar
    T, S = split(y, n)
    return space_y.evaluate(T), space_y.evaluate(S)


def assemble_buoyancy(y_field, model, space_y, space_u=None, mode="value"):
    """Buoyancy load (F(y), v) or its Jacobian block (F_y(y) chi, v).

    The Jacobian block maps scalar-pair dofs to velocity test functions.
    """
    space_u = space_u or space_y
    T, S = pair_at_quad(space_y, y_field)
    if mode == "value":
        F = model.buoyancy.F(T, S)
        v = vals(space_u)
        return np.concatenate([scalar_vector(space_u, weights(space_u, F[k]), v)
                               for k in range(2)])
    if mode == "jacobian":
        Fy = model.buoyancy.F_y(T, S)
        blocks = [[None, None], [None, None]]
        for k in range(2):
            for l in range(2):
                blocks[k][l] = scalar_block(space_u, space_y,
                                            weights(space_u, np.asarray(Fy[k][l]) + 0 * T),
                                            vals(space_u), vals(space_y))
        return block_matrix(blocks)
    raise ValueError(f"mode must be 'value' or 'jacobian', got {mode!r}")


def load(space, f_pair):
    """Load vector ((f1, f2), v) for a pair of values at quadrature points."""
    v = vals(space)
    return np.concatenate([scalar_vector(space, weights(space, f_pair[k]), v)
                           for k in range(2)])


def apply_lifting(space_y, ydata):
    """Discrete harmonic extension (Laplacian, D = I) of boundary data.

    ``ydata`` is a pair-space coefficient vector whose boundary entries hold
    y^D; interior entries are ignored.
    """
    n = space_y.n_scalar
    K = stiffness(space_y)
    bnd = np.flatnonzero(space_y.scalar_boundary_mask)
    out = []
    for c in range(2):
        g = np.asarray(ydata[c * n:(c + 1) * n], dtype=float)
        if not np.any(g[bnd]):
            out.append(np.zeros(n))
            continue
        sysc = LinearSystem(K, np.zeros(n), bnd, g[bnd])
        out.append(solve(sysc, tol=1e-12))
    return np.concatenate(out)


def control_matrix(space_u, space_c):
    """M_U[(k, i), (k, e)] = int_e phi_i: maps cellwise controls to loads."""
    ne = space_u.mesh.num_triangles
    w = weights(space_u)
    blk = scalar_block(space_u, space_c, w, vals(space_u),
                       np.ones((ne, w.shape[1], 1)))
    Z = sp.csr_matrix(blk.shape)
    return block_matrix([[blk, Z], [Z, blk]])
