# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled coordinate-descent core for the weighted-penalty Lasso.

Mirrors ``_cd_py.cd_solve`` exactly: cyclic sweeps on the Gram system,
zero start, convergence on the largest per-sweep coefficient change.
"""

import numpy as np


def cd_solve(double[:, ::1] gram, double[::1] xty, double lam,
             double[::1] penalty, int max_iter, double tol):
    cdef Py_ssize_t m = xty.shape[0]
    coef_arr = np.zeros(m)
    q_arr = np.zeros(m)
    cdef double[::1] coef = coef_arr
    cdef double[::1] q = q_arr
    cdef Py_ssize_t j, i, sweep
    cdef double dj, z, t, new, delta, ad, max_change
    cdef Py_ssize_t n_sweeps = 0
    cdef bint converged = 0

    for sweep in range(max_iter):
        max_change = 0.0
        for j in range(m):
            dj = gram[j, j]
            if dj <= 0.0:
                continue
            z = xty[j] - q[j] + dj * coef[j]
            t = 0.5 * lam * penalty[j]
            if z > t:
                new = (z - t) / dj
            elif z < -t:
                new = (z + t) / dj
            else:
                new = 0.0
            delta = new - coef[j]
            if delta != 0.0:
                for i in range(m):
                    q[i] += delta * gram[j, i]
                coef[j] = new
                ad = -delta if delta < 0.0 else delta
                if ad > max_change:
                    max_change = ad
        n_sweeps = sweep + 1
        if max_change <= tol:
            converged = 1
            break
    return coef_arr, int(n_sweeps), bool(converged)
