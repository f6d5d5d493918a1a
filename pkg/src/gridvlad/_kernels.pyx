# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: nearest-center search, VLAD residual accumulation,
and the dual-coordinate-descent epoch of the linear SVM trainer.

Same call signatures as gridvlad._kernels_py; gridvlad.kernels picks one
implementation at import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()


def nearest_centers(double[:, ::1] x, double[:, ::1] centers):
    """Index of the nearest center for every row of x (ties -> smallest index),
    plus the squared distance to it."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    if centers.shape[1] != d:
        raise ValueError(f"dimension mismatch: descriptors {d}, centers {centers.shape[1]}")
    if k == 0:
        raise ValueError("need at least one center")

    idx_arr = np.empty(n, dtype=np.int64)
    d2_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] d2 = d2_arr
    cdef Py_ssize_t i, j, c
    cdef double best, dist, diff
    cdef cnp.int64_t best_c

    with nogil:
        for i in range(n):
            best = INFINITY
            best_c = 0
            for c in range(k):
                dist = 0.0
                for j in range(d):
                    diff = x[i, j] - centers[c, j]
                    dist += diff * diff
                if dist < best:
                    best = dist
                    best_c = c
            idx[i] = best_c
            d2[i] = best
    return idx_arr, d2_arr


def residual_sums(double[:, ::1] x, double[:, ::1] centers, cnp.int64_t[::1] idx):
    """Accumulate sum(x_i - c_assigned) per center into a (K, D) matrix."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    if centers.shape[1] != d:
        raise ValueError(f"dimension mismatch: descriptors {d}, centers {centers.shape[1]}")
    if idx.shape[0] != n:
        raise ValueError("assignment length does not match descriptor count")

    out_arr = np.zeros((k, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t c

    with nogil:
        for i in range(n):
            c = idx[i]
            for j in range(d):
                out[c, j] += x[i, j] - centers[c, j]
    return out_arr


def dcd_epoch(double[:, ::1] x, double[::1] y, double[::1] alpha, double[::1] w,
              double c_reg, double[::1] qdiag, cnp.int64_t[::1] perm):
    """One dual-coordinate-descent epoch over the (pre-shuffled) sample order.

    Updates alpha and w in place; returns the largest projected-gradient
    violation seen during the epoch.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t t, j, i
    cdef double g, pg, a_old, a_new, delta, maxviol

    maxviol = 0.0
    with nogil:
        for t in range(n):
            i = perm[t]
            g = 0.0
            for j in range(d):
                g += w[j] * x[i, j]
            g = g * y[i] - 1.0

            if alpha[i] == 0.0:
                pg = g if g < 0.0 else 0.0
            elif alpha[i] == c_reg:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if fabs(pg) > maxviol:
                maxviol = fabs(pg)

            if pg != 0.0:
                a_old = alpha[i]
                a_new = a_old - g / qdiag[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > c_reg:
                    a_new = c_reg
                alpha[i] = a_new
                delta = (a_new - a_old) * y[i]
                if delta != 0.0:
                    for j in range(d):
                        w[j] += delta * x[i, j]
    return maxviol
