# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

DEF HERMITE = 0


cdef inline void _fill_table(int family, int degree, double x, double* row) noexcept nogil:
    cdef int k
    cdef double p_prev, p_cur, p_next
    row[0] = 1.0
    if degree == 0:
        return
    if family == HERMITE:
        row[1] = x
        for k in range(1, degree):
            row[k + 1] = (x * row[k] - sqrt(<double>k) * row[k - 1]) / sqrt(k + 1.0)
    else:
        p_prev = 1.0
        p_cur = x
        row[1] = sqrt(3.0) * x
        for k in range(1, degree):
            p_next = ((2 * k + 1) * x * p_cur - k * p_prev) / (k + 1.0)
            p_prev = p_cur
            p_cur = p_next
            row[k + 1] = sqrt(2.0 * (k + 1) + 1.0) * p_cur


def basis_table(int family, int degree, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], r
    out = np.empty((n, degree + 1), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for r in range(n):
            _fill_table(family, degree, xv[r], &ov[r, 0])
    return out


def design_matrix(int family, indices, x):
    cdef cnp.int64_t[:, ::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], n_terms = idx.shape[0]
    cdef int degree = int(np.max(indices)) if n_terms else 0
    out = np.empty((n, n_terms), dtype=np.float64)
    cdef double[:, ::1] ov = out
    table = np.empty((m, degree + 1), dtype=np.float64)
    cdef double[:, ::1] tv = table
    cdef Py_ssize_t r, i, j
    cdef double acc
    with nogil:
        for r in range(n):
            for i in range(m):
                _fill_table(family, degree, xv[r, i], &tv[i, 0])
            for j in range(n_terms):
                acc = 1.0
                for i in range(m):
                    acc = acc * tv[i, idx[j, i]]
                ov[r, j] = acc
    return out


def wasserstein1(a, b):
    cdef double[::1] av = np.sort(np.asarray(a, dtype=np.float64))
    cdef double[::1] bv = np.sort(np.asarray(b, dtype=np.float64))
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double u = 0.0, next_a, next_b, nxt, total = 0.0
    with nogil:
        # walk the merged breakpoints i/na and j/nb of both quantile functions
        while i < na and j < nb:
            next_a = (i + 1.0) / na
            next_b = (j + 1.0) / nb
            nxt = next_a if next_a < next_b else next_b
            total += fabs(av[i] - bv[j]) * (nxt - u)
            u = nxt
            if next_a <= nxt:
                i += 1
            if next_b <= nxt:
                j += 1
    return total
