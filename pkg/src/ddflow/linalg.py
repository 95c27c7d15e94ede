"""Sparse storage and direct solves for the assembled saddle-point systems.

Matrices are ``scipy.sparse.csr_matrix`` objects in canonical form (sorted
column indices, no duplicates). Factorization is SuperLU with partial
pivoting, which is deterministic for identical inputs.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Raised when a linear solve breaks down or misses its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def as_csr(A):
    """Return ``A`` as a canonical CSR matrix (float64, sorted, summed)."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def from_csr_arrays(n_rows, n_cols, row_offsets, col_indices, values):
    """Build a matrix from raw CSR arrays, checking the storage invariants."""
    row_offsets = np.asarray(row_offsets, dtype=np.int64)
    col_indices = np.asarray(col_indices, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if row_offsets.shape != (n_rows + 1,) or row_offsets[0] != 0:
        raise ValueError("row_offsets must have length n_rows + 1 and start at 0")
    if np.any(np.diff(row_offsets) < 0):
        raise ValueError("row_offsets must be nondecreasing")
    if values.shape[0] != row_offsets[-1] or col_indices.shape[0] != row_offsets[-1]:
        raise ValueError("values/col_indices length must equal row_offsets[n_rows]")
    for r in range(n_rows):
        cols = col_indices[row_offsets[r]:row_offsets[r + 1]]
        if np.any(np.diff(cols) <= 0):
            raise ValueError(f"column indices of row {r} not strictly increasing")
    if col_indices.size and (col_indices.min() < 0 or col_indices.max() >= n_cols):
        raise ValueError("column index out of range")
    return sp.csr_matrix((values, col_indices, row_offsets), shape=(n_rows, n_cols))


def spmv(A, x):
    """Matrix-vector product with an explicit dimension check."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, "
                         f"vector has shape {x.shape}")
    return A @ x


@dataclass
class LinearSystem:
    """Matrix, right-hand side and Dirichlet-type constraints.

    ``constrained`` maps dof index -> prescribed value. :meth:`constrained_form`
    replaces each constrained row by the identity row and eliminates the
    matching column into the right-hand side, so the free-dof block keeps
    its structure (and its transpose is the transpose of the free block).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    constrained_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def constrained_form(self):
        A = as_csr(self.matrix)
        n = A.shape[0]
        b = np.array(self.rhs, dtype=np.float64, copy=True)
        dofs = np.asarray(self.constrained_dofs, dtype=np.int64)
        vals = np.broadcast_to(np.asarray(self.constrained_values, dtype=np.float64), dofs.shape)
        if dofs.size == 0:
            return A, b
        g = np.zeros(n)
        g[dofs] = vals
        b -= A @ g
        keep = np.ones(n)
        keep[dofs] = 0.0
        K = sp.diags(keep)
        A = as_csr(K @ A @ K + sp.diags(1.0 - keep))
        b[dofs] = vals
        return A, b


class Factorization:
    """Reusable sparse LU of a constrained system matrix."""

    def __init__(self, A):
        self.matrix = as_csr(A)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("matrix must be square")
        try:
            self._lu = spla.splu(self.matrix.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:  # SuperLU reports exact singularity this way
            raise SolverError(f"factorization failed: {exc}") from exc

    def solve(self, b, tol=1e-10, trans=False):
        b = np.asarray(b, dtype=np.float64)
        x = self._lu.solve(b, trans="T" if trans else "N")
        A = self.matrix.T if trans else self.matrix
        return _checked(A, x, b, tol)


def _checked(A, x, b, tol):
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values", residual=np.inf)
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    rel = r / nb if nb > 0 else r
    if rel > tol:
        # one step of iterative refinement before giving up
        x = x + spla.spsolve(A.tocsc(), b - A @ x)
        r = np.linalg.norm(A @ x - b)
        rel = r / nb if nb > 0 else r
        if rel > tol:
            raise SolverError(f"relative residual {rel:.3e} exceeds tolerance {tol:.1e}",
                              residual=rel)
    return x


def solve(system, tol=1e-10):
    """Solve a :class:`LinearSystem`; constrained dofs come back exact."""
    A, b = system.constrained_form()
    x = Factorization(A).solve(b, tol=tol)
    dofs = np.asarray(system.constrained_dofs, dtype=np.int64)
    if dofs.size:
        x[dofs] = np.broadcast_to(system.constrained_values, dofs.shape)
    return x


def write_matrix_market(path, A, comment=""):
    """Dump a matrix in MatrixMarket coordinate format (debugging aid)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
