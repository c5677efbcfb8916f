"""NumPy fallback for the coordinate-descent core.

Same contract as the compiled module ``_cd``: cyclic coordinate descent on
the Gram system of

    sum_i (y_i - x_i' t)^2 + lam * sum_j penalty_j |t_j|

starting from t = 0, stopping when the largest coefficient change in a sweep
is at most ``tol`` or after ``max_iter`` sweeps.
"""

import numpy as np


def cd_solve(gram, xty, lam, penalty, max_iter, tol):
    """Minimize the weighted-penalty Lasso objective via its Gram matrices.

    Parameters
    ----------
    gram : (m, m) ndarray, X'X
    xty : (m,) ndarray, X'y
    lam : float, penalty level
    penalty : (m,) ndarray, per-coordinate penalty loadings
    max_iter : int, sweep cap
    tol : float, convergence threshold on the max coefficient change

    Returns
    -------
    (coef, n_sweeps, converged)
    """
    m = xty.shape[0]
    coef = np.zeros(m)
    q = np.zeros(m)  # gram @ coef, maintained incrementally
    thr = 0.5 * lam * np.asarray(penalty, dtype=float)
    diag = np.ascontiguousarray(np.diagonal(gram))
    n_sweeps = 0
    converged = False
    for sweep in range(max_iter):
        max_change = 0.0
        for j in range(m):
            dj = diag[j]
            if dj <= 0.0:
                continue
            z = xty[j] - q[j] + dj * coef[j]
            t = thr[j]
            if z > t:
                new = (z - t) / dj
            elif z < -t:
                new = (z + t) / dj
            else:
                new = 0.0
            delta = new - coef[j]
            if delta != 0.0:
                q += delta * gram[j]
                coef[j] = new
                ad = abs(delta)
                if ad > max_change:
                    max_change = ad
        n_sweeps = sweep + 1
        if max_change <= tol:
            converged = True
            break
    return coef, n_sweeps, converged
