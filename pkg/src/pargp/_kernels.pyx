# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assembly of exponential covariance matrices (GIL released)."""
import numpy as np

from libc.math cimport exp, sqrt

def exp_cov_matrix(const double[::1] x, const double[::1] y, double theta):
    """Symmetric ``exp(-d/theta)`` matrix; lower triangle computed, upper mirrored."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j, ib, jb, iend, jend
    cdef Py_ssize_t TILE = 64
    cdef double dx, dy
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] K = out
    with nogil:
        for i in range(n):
            K[i, i] = 1.0
            for j in range(i):
                dx = x[i] - x[j]
                dy = y[i] - y[j]
                K[i, j] = exp(-sqrt(dx * dx + dy * dy) / theta)
        # mirror lower -> upper tile by tile to stay cache friendly
        ib = 0
        while ib < n:
            iend = ib + TILE if ib + TILE < n else n
            jb = 0
            while jb <= ib:
                jend = jb + TILE if jb + TILE < n else n
                for i in range(ib, iend):
                    for j in range(jb, jend):
                        if j >= i:
                            break
                        K[j, i] = K[i, j]
                jb += TILE
            ib += TILE
    return out


def exp_cross_cov(const double[::1] x1, const double[::1] y1,
                  const double[::1] x2, const double[::1] y2, double theta):
    """``out[p, i] = exp(-|s2_p - s1_i| / theta)`` with shape (len(x2), len(x1))."""
    cdef Py_ssize_t n = x1.shape[0]
    cdef Py_ssize_t m = x2.shape[0]
    cdef Py_ssize_t p, i
    cdef double dx, dy, px, py
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] C = out
    with nogil:
        for p in range(m):
            px = x2[p]
            py = y2[p]
            for i in range(n):
                dx = x1[i] - px
                dy = y1[i] - py
                C[p, i] = exp(-sqrt(dx * dx + dy * dy) / theta)
    return out
