"""Pure-Python coordinate-descent kernels (fallback for :mod:`loocv._cd`)."""

import numpy as np

BACKEND = "python"


def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def _sweep(A, r, x, col_sq, lam, active_only):
    dmax = 0.0
    for j in range(A.shape[1]):
        c = col_sq[j]
        if c == 0.0 or (active_only and x[j] == 0.0):
            continue
        a = A[:, j]
        xn = _soft(float(a @ r) + c * x[j], lam) / c
        d = xn - x[j]
        if d != 0.0:
            r -= a * d
            x[j] = xn
            dmax = max(dmax, abs(d) * c)
    return dmax


def kkt_violation(A, r, x, lam):
    g = A.T @ r
    v = np.where(x > 0, np.abs(g - lam), np.where(x < 0, np.abs(g + lam), np.abs(g) - lam))
    return float(v.max(initial=-np.inf)) if v.size else 0.0


def _objective(r, x, lam):
    return 0.5 * float(r @ r) + lam * float(np.abs(x).sum())


def cd_lasso(A, r, x, col_sq, lam, tol, max_iter, trace=None):
    n = 0
    while True:
        kkt = kkt_violation(A, r, x, lam)
        if kkt <= tol or n >= max_iter:
            break
        _sweep(A, r, x, col_sq, lam, False)
        if trace is not None and n < trace.shape[0]:
            trace[n] = _objective(r, x, lam)
        n += 1
        while n < max_iter:
            d = _sweep(A, r, x, col_sq, lam, True)
            if trace is not None and n < trace.shape[0]:
                trace[n] = _objective(r, x, lam)
            n += 1
            if d <= tol:
                break
    return n, kkt
