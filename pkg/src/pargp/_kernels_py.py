"""Numpy fallback for the compiled covariance kernels (same contracts)."""
import numpy as np

_BLOCK = 512


def exp_cov_matrix(x, y, theta):
    n = x.shape[0]
    K = np.empty((n, n))
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        dx = x[i0:i1, None] - x[None, :i1]
        dy = y[i0:i1, None] - y[None, :i1]
        blk = np.exp(-np.sqrt(dx * dx + dy * dy) / theta)
        K[i0:i1, :i1] = blk
        diag = K[i0:i1, i0:i1]
        iu = np.triu_indices(i1 - i0, 1)
        diag[iu] = diag.T[iu]
        K[:i0, i0:i1] = K[i0:i1, :i0].T
    np.fill_diagonal(K, 1.0)
    return K


def exp_cross_cov(x1, y1, x2, y2, theta):
    m = x2.shape[0]
    out = np.empty((m, x1.shape[0]))
    for p0 in range(0, m, _BLOCK):
        p1 = min(p0 + _BLOCK, m)
        dx = x1[None, :] - x2[p0:p1, None]
        dy = y1[None, :] - y2[p0:p1, None]
        out[p0:p1] = np.exp(-np.sqrt(dx * dx + dy * dy) / theta)
    return out
