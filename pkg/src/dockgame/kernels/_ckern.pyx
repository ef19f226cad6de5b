# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot inner kernels.

Operation order matches ``_pykern`` so both backends agree bitwise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def scatter_add(double[:, ::1] out, long[::1] idx, double[:, ::1] src):
    cdef Py_ssize_t k, c, row
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t d = src.shape[1]
    for k in range(n):
        row = idx[k]
        for c in range(d):
            out[row, c] += src[k, c]
    return np.asarray(out)


def pairwise_distances(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef double acc, diff
    res = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] rv = res
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for c in range(d):
                diff = a[i, c] - b[j, c]
                acc += diff * diff
            rv[i, j] = sqrt(acc)
    return res


def radius_pairs(double[:, ::1] a, double[:, ::1] b, double cutoff,
                 bint skip_same_index=False):
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef double acc, diff
    cdef double cut2 = cutoff * cutoff
    cdef list ii = []
    cdef list jj = []
    for i in range(na):
        for j in range(nb):
            if skip_same_index and j <= i:
                continue
            acc = 0.0
            for c in range(d):
                diff = a[i, c] - b[j, c]
                acc += diff * diff
            if acc <= cut2:
                ii.append(i)
                jj.append(j)
    return (np.asarray(ii, dtype=np.int64), np.asarray(jj, dtype=np.int64))
