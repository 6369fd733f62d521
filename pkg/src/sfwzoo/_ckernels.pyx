# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sparse kernels for the logistic finite-sum objective.

Every function mirrors one in ``_pykernels`` with the same signature and
the same result up to floating-point summation order.
"""
import numpy as np

from libc.math cimport exp, log1p
from libc.stdint cimport int64_t


def row_margins(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] data, const double[::1] x,
                const int64_t[::1] rows):
    """Return ``<a_r, x>`` for each ``r`` in ``rows``."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t t, r
    cdef int64_t p
    cdef double acc
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for t in range(m):
            r = rows[t]
            acc = 0.0
            for p in range(indptr[r], indptr[r + 1]):
                acc = acc + data[p] * x[indices[p]]
            o[t] = acc
    return out


def all_margins(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t r
    cdef int64_t p
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            acc = 0.0
            for p in range(indptr[r], indptr[r + 1]):
                acc = acc + data[p] * x[indices[p]]
            o[r] = acc
    return out


def add_weighted_rows(const int64_t[::1] indptr, const int64_t[::1] indices,
                      const double[::1] data, const int64_t[::1] rows,
                      const double[::1] weights, double[::1] out):
    """In place: ``out += sum_t weights[t] * a_{rows[t]}``."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t t, r
    cdef int64_t p
    cdef double w
    with nogil:
        for t in range(m):
            r = rows[t]
            w = weights[t]
            if w == 0.0:
                continue
            for p in range(indptr[r], indptr[r + 1]):
                out[indices[p]] += w * data[p]


def rows_to_dense(const int64_t[::1] indptr, const int64_t[::1] indices,
                  const double[::1] data, const int64_t[::1] rows,
                  const double[::1] weights, double[:, ::1] out):
    """Overwrite ``out[t] = weights[t] * a_{rows[t]}`` as dense rows."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t dim = out.shape[1]
    cdef Py_ssize_t t, r, j
    cdef int64_t p
    cdef double w
    with nogil:
        for t in range(m):
            for j in range(dim):
                out[t, j] = 0.0
            r = rows[t]
            w = weights[t]
            for p in range(indptr[r], indptr[r + 1]):
                out[t, indices[p]] = w * data[p]


def weighted_column(const int64_t[::1] cindptr, const int64_t[::1] cindices,
                    const double[::1] cdata, Py_ssize_t j,
                    const double[::1] weights):
    """Return ``sum_i weights[i] * A[i, j]`` from CSC arrays."""
    cdef int64_t p
    cdef double acc = 0.0
    with nogil:
        for p in range(cindptr[j], cindptr[j + 1]):
            acc = acc + cdata[p] * weights[cindices[p]]
    return acc


def logistic_loss_sum(const double[::1] t):
    """Sum of ``log(1 + exp(t_i))`` with the large-argument branch at 35."""
    cdef Py_ssize_t i, n = t.shape[0]
    cdef double acc = 0.0
    cdef double v
    with nogil:
        for i in range(n):
            v = t[i]
            if v > 35.0:
                acc = acc + v + log1p(exp(-v))
            else:
                acc = acc + log1p(exp(v))
    return acc
