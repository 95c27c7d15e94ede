"""Pure-numpy element kernels (fallback for the compiled extension)."""
import numpy as np


def local_matrices(wq, test, trial):
    """Return ``out[e, i, j] = sum_q wq[e, q] * test[e, q, i] * trial[e, q, j]``."""
    return np.einsum("eq,eqi,eqj->eij", wq, test, trial, optimize=True)


def local_vectors(wq, test):
    """Return ``out[e, i] = sum_q wq[e, q] * test[e, q, i]``."""
    return np.einsum("eq,eqi->ei", wq, test)


def scatter_add(pos, vals, n):
    """Accumulate ``vals`` into an array of length ``n`` at indices ``pos``."""
    return np.bincount(pos, weights=vals, minlength=n).astype(np.float64)
