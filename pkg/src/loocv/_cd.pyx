# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coordinate-descent core for the LASSO.

Mirrors :mod:`loocv._cd_py` operation for operation; the two are tested
against each other.
"""

from libc.math cimport fabs
from scipy.linalg.cython_blas cimport daxpy, ddot

BACKEND = "cython"


cdef inline double _soft(double z, double lam) noexcept nogil:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


cdef double _dot_col(const double[::1, :] A, Py_ssize_t j, double[::1] r) noexcept nogil:
    cdef int M = <int>A.shape[0], one = 1
    return ddot(&M, <double*>&A[0, j], &one, &r[0], &one)


cdef double _sweep(const double[::1, :] A, double[::1] r, double[::1] x,
                   const double[::1] col_sq, double lam, bint active_only) noexcept nogil:
    cdef Py_ssize_t j, N = A.shape[1]
    cdef int m = <int>A.shape[0], one = 1
    cdef double z, xn, d, nd, dmax = 0.0
    for j in range(N):
        if col_sq[j] == 0.0:
            continue
        if active_only and x[j] == 0.0:
            continue
        z = _dot_col(A, j, r) + col_sq[j] * x[j]
        xn = _soft(z, lam) / col_sq[j]
        d = xn - x[j]
        if d != 0.0:
            nd = -d
            daxpy(&m, &nd, <double*>&A[0, j], &one, &r[0], &one)
            x[j] = xn
            if fabs(d) * col_sq[j] > dmax:
                dmax = fabs(d) * col_sq[j]
    return dmax


cdef double _kkt(const double[::1, :] A, double[::1] r, double[::1] x, double lam) noexcept nogil:
    cdef Py_ssize_t j, N = A.shape[1]
    cdef double g, v, worst = 0.0
    for j in range(N):
        g = _dot_col(A, j, r)
        if x[j] > 0.0:
            v = fabs(g - lam)
        elif x[j] < 0.0:
            v = fabs(g + lam)
        else:
            v = fabs(g) - lam
        if v > worst:
            worst = v
    return worst


cdef double _objective(double[::1] r, double[::1] x, double lam) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, t = 0.0
    for i in range(r.shape[0]):
        s += r[i] * r[i]
    for i in range(x.shape[0]):
        t += fabs(x[i])
    return 0.5 * s + lam * t


def kkt_violation(const double[::1, :] A, double[::1] r, double[::1] x, double lam):
    with nogil:
        v = _kkt(A, r, x, lam)
    return v


def cd_lasso(const double[::1, :] A, double[::1] r, double[::1] x,
             const double[::1] col_sq, double lam, double tol, long max_iter,
             double[::1] trace=None):
    """Cyclic coordinate descent for ``0.5*||y - A x||^2 + lam*||x||_1``.

    ``x`` and the residual ``r = y - A x`` are updated in place. Full sweeps
    alternate with sweeps restricted to the nonzero coordinates; the loop
    stops once the KKT violation drops to ``tol`` or after ``max_iter``
    sweeps. When ``trace`` is given, the objective after sweep ``k`` is
    written to ``trace[k]`` while space remains.

    Returns ``(sweeps, kkt_violation)``.
    """
    cdef long n = 0
    cdef double kkt, d
    cdef bint record = trace is not None
    cdef Py_ssize_t ntrace = trace.shape[0] if record else 0
    with nogil:
        while True:
            kkt = _kkt(A, r, x, lam)
            if kkt <= tol or n >= max_iter:
                break
            _sweep(A, r, x, col_sq, lam, False)
            if record and n < ntrace:
                trace[n] = _objective(r, x, lam)
            n += 1
            while n < max_iter:
                d = _sweep(A, r, x, col_sq, lam, True)
                if record and n < ntrace:
                    trace[n] = _objective(r, x, lam)
                n += 1
                if d <= tol:
                    break
    return n, kkt
