# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-row projection kernels (same contract as _pure)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, INFINITY

cnp.import_array()


cdef void _row_quadratic(const double* c, const double* ref, double T,
                         Py_ssize_t m, double* p,
                         Py_ssize_t* order) noexcept nogil:
    # r=2 sorted sweep; insertion sort on cost is stable, keeping original
    # index order on ties
    cdef Py_ssize_t i, j, saved, kstar
    cdef double W, S, mu, key, l1, x
    cdef double twoT = 2.0 * T
    for i in range(m):
        order[i] = i
    for i in range(1, m):
        saved = order[i]
        key = c[saved]
        j = i
        while j > 0 and c[order[j - 1]] > key:
            order[j] = order[j - 1]
            j -= 1
        order[j] = saved
    W = ref[order[0]]
    S = ref[order[0]] * c[order[0]]
    kstar = m
    for i in range(1, m):
        l1 = (W * c[order[i]] - S) / twoT
        if l1 >= 1.0:
            kstar = i
            break
        W += ref[order[i]]
        S += ref[order[i]] * c[order[i]]
    mu = (twoT + S) / W
    S = 0.0
    for i in range(m):
        x = mu - c[i]
        p[i] = ref[i] * x / twoT if x > 0.0 else 0.0
        S += p[i]
    for i in range(m):
        p[i] /= S


cdef int _row_bisection(const double* c, const double* ref, double r,
                        double T, Py_ssize_t m, double* p) noexcept nogil:
    cdef double rups = r * T / (r - 1.0)
    cdef double expinv = 1.0 / (r - 1.0)
    cdef double lo = INFINITY
    cdef double hi = -INFINITY
    cdef Py_ssize_t i, it
    cdef double mu, s, x, lt, width0, total
    for i in range(m):
        if c[i] < lo:
            lo = c[i]
        if c[i] > hi:
            hi = c[i]
    hi += rups
    width0 = hi - lo
    mu = hi
    for it in range(200):
        mu = 0.5 * (lo + hi)
        s = 0.0
        for i in range(m):
            x = mu - c[i]
            if x > 0.0:
                lt = log(x / rups) * expinv
                if lt > 700.0:
                    s = INFINITY
                    break
                s += ref[i] * exp(lt)
        if fabs(s - 1.0) <= 1e-12 or (hi - lo) <= 1e-14 * width0:
            break
        if s < 1.0:
            lo = mu
        else:
            hi = mu
    total = 0.0
    for i in range(m):
        x = mu - c[i]
        if x > 0.0:
            lt = log(x / rups) * expinv
            p[i] = ref[i] * exp(lt) if lt <= 700.0 else INFINITY
        else:
            p[i] = 0.0
        total += p[i]
    if not (total > 0.0) or total == INFINITY:
        return 1
    for i in range(m):
        p[i] /= total
    return 0


def policy_rows(const double[::1] aug_cost, const double[::1] ref,
                const cnp.int64_t[::1] indptr, double r, double T,
                Py_ssize_t skip, double[::1] out):
    """Solve the simplex projection on every CSR row; see _pure.policy_rows."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, j, a, b, m
    cdef Py_ssize_t mmax = 0
    for i in range(n):
        m = indptr[i + 1] - indptr[i]
        if m > mmax:
            mmax = m
    order_buf = np.empty(max(mmax, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] order_view = order_buf
    cdef Py_ssize_t* order = &order_view[0]
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            a = indptr[i]
            b = indptr[i + 1]
            m = b - a
            if i == skip:
                for j in range(a, b):
                    out[j] = 0.0
                continue
            if r == 2.0:
                _row_quadratic(&aug_cost[a], &ref[a], T, m, &out[a], order)
            else:
                if _row_bisection(&aug_cost[a], &ref[a], r, T, m, &out[a]) != 0:
                    bad = i
                    break
    return bad
