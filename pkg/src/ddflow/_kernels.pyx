# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels.

Both functions mirror ``ddflow._kernels_py`` exactly; the pure-numpy
versions are the reference the test suite compares against.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def local_matrices(const double[:, :] wq, const double[:, :, :] test,
                   const double[:, :, :] trial):
    """Return ``out[e, i, j] = sum_q wq[e, q] * test[e, q, i] * trial[e, q, j]``."""
    cdef Py_ssize_t ne = wq.shape[0], nq = wq.shape[1]
    cdef Py_ssize_t ni = test.shape[2], nj = trial.shape[2]
    cdef Py_ssize_t e, q, i, j
    cdef double a
    out = np.zeros((ne, ni, nj), dtype=np.float64)
    cdef double[:, :, :] o = out
    for e in range(ne):
        for q in range(nq):
            for i in range(ni):
                a = wq[e, q] * test[e, q, i]
                if a == 0.0:
                    continue
                for j in range(nj):
                    o[e, i, j] += a * trial[e, q, j]
    return out


def local_vectors(const double[:, :] wq, const double[:, :, :] test):
    """Return ``out[e, i] = sum_q wq[e, q] * test[e, q, i]``."""
    cdef Py_ssize_t ne = wq.shape[0], nq = wq.shape[1], ni = test.shape[2]
    cdef Py_ssize_t e, q, i
    out = np.zeros((ne, ni), dtype=np.float64)
    cdef double[:, :] o = out
    for e in range(ne):
        for q in range(nq):
            for i in range(ni):
                o[e, i] += wq[e, q] * test[e, q, i]
    return out


def scatter_add(const cnp.int64_t[:] pos, const double[:] vals, Py_ssize_t n):
    """Accumulate ``vals`` into an array of length ``n`` at indices ``pos``."""
    cdef Py_ssize_t k, m = pos.shape[0]
    out = np.zeros(n, dtype=np.float64)
    cdef double[:] o = out
    for k in range(m):
        o[pos[k]] += vals[k]
    return out
