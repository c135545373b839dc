# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the efficiency study.

Mirrors ``_fallback``; see there for the meaning of every argument.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "compiled"


cdef inline int _estimates(const double* y, const double* x, const double* q,
                           const double* qs, const long long* idx, int n,
                           double xbar_pop, double* est_lr, double* est_ds) noexcept nogil:
    # returns 1 when the sample is degenerate for either slope
    cdef int k
    cdef long long u
    cdef double sy = 0.0, sx = 0.0, g0 = 0.0, gx = 0.0, gy = 0.0
    cdef double dxx = 0.0, dxy = 0.0, gscale = 0.0, qxx = 0.0, qxy = 0.0
    cdef double xm, ym, xg, yg, cx
    for k in range(n):
        u = idx[k]
        sy += y[u]
        sx += x[u]
        g0 += qs[u]
        gx += qs[u] * x[u]
        gy += qs[u] * y[u]
        gscale += qs[u] * x[u] * x[u]
        qxx += q[u] * x[u] * x[u]
        qxy += q[u] * x[u] * y[u]
    xm = sx / n
    ym = sy / n
    xg = gx / g0
    yg = gy / g0
    for k in range(n):
        u = idx[k]
        cx = x[u] - xg
        dxx += qs[u] * cx * cx
        dxy += qs[u] * cx * (y[u] - yg)
    if not (gscale > 0.0) or dxx < 1e-12 * gscale or not (qxx > 0.0):
        est_lr[0] = ym
        est_ds[0] = ym
        return 1
    est_lr[0] = ym + (dxy / dxx) * (xbar_pop - xm)
    est_ds[0] = ym + (qxy / qxx) * (xbar_pop - xm)
    return 0


def enum_sq_errors(const double[::1] y, const double[::1] x, const double[::1] q, const double[::1] qs,
                   const long long[::1] first, long long count, double xbar_pop,
                   double ybar_pop, bint fallback):
    cdef Py_ssize_t N = y.shape[0]
    cdef int n = first.shape[0]
    cdef long long[::1] c = np.array(first, dtype=np.int64)
    cdef long long visited = 0, skipped = 0, t
    cdef double sum_lr = 0.0, sum_ds = 0.0, e_lr = 0.0, e_ds = 0.0
    cdef int i, j, bad
    with nogil:
        for t in range(count):
            bad = _estimates(&y[0], &x[0], &q[0], &qs[0], &c[0], n, xbar_pop, &e_lr, &e_ds)
            visited += 1
            if bad and not fallback:
                skipped += 1
            else:
                sum_lr += (e_lr - ybar_pop) * (e_lr - ybar_pop)
                sum_ds += (e_ds - ybar_pop) * (e_ds - ybar_pop)
            i = n - 1
            while i >= 0 and c[i] == N - n + i:
                i -= 1
            if i < 0:
                break
            c[i] += 1
            for j in range(i + 1, n):
                c[j] = c[j - 1] + 1
    return sum_lr, sum_ds, visited, skipped


def mc_sq_errors(const double[:, ::1] ys, const double[:, ::1] xs, double rho, double sy2,
                 double sx2, double mu_y, double mu_x, bint fallback):
    cdef Py_ssize_t R = ys.shape[0]
    cdef int n = ys.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_lr = np.empty(R)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_ds = np.empty(R)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out_bad = np.zeros(R, dtype=np.uint8)
    cdef double[::1] lr = out_lr, ds = out_ds
    cdef unsigned char[::1] badv = out_bad
    cdef double[::1] yb = np.empty(n), xb = np.empty(n), ones = np.ones(n)
    cdef long long[::1] idx = np.arange(n, dtype=np.int64)
    cdef double a = sqrt(sy2 * (1.0 - rho * rho)), b = rho * sqrt(sy2), sx = sqrt(sx2)
    cdef double e_lr = 0.0, e_ds = 0.0
    cdef Py_ssize_t r
    cdef int k, bad
    with nogil:
        for r in range(R):
            for k in range(n):
                yb[k] = mu_y + a * ys[r, k] + b * xs[r, k]
                xb[k] = mu_x + sx * xs[r, k]
            bad = _estimates(&yb[0], &xb[0], &ones[0], &ones[0], &idx[0], n, mu_x,
                             &e_lr, &e_ds)
            badv[r] = bad
            if bad and not fallback:
                lr[r] = 0.0
                ds[r] = 0.0
            else:
                lr[r] = (e_lr - mu_y) * (e_lr - mu_y)
                ds[r] = (e_ds - mu_y) * (e_ds - mu_y)
    return out_lr, out_ds, out_bad.astype(bool)
