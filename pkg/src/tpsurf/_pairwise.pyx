# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise kernels for the tangent-point repulsion sums.

Row sums use the same exponent-binned, order-invariant reduction as the
numpy fallback, so results are deterministic under any thread
partitioning of the row range.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, frexp, ldexp, pow, sqrt

cnp.import_array()

BACKEND_NAME = "cython"

cdef double PLANE_REL_TOL = 1e-14


cdef inline double _pow_q(double k, double q, int qi, bint integral) nogil:
    cdef double result = 1.0
    cdef double base = k
    cdef int e = qi
    if not integral:
        return pow(k, q)
    while e:
        if e & 1:
            result *= base
        e >>= 1
        if e:
            base *= base
    return result


cdef double _binned_sum(double* buf, Py_ssize_t n) nogil:
    """Order-invariant sum of buf[0..n); clobbers buf."""
    cdef double total = 0.0
    cdef double m, a, scale, chunk, partial
    cdef int exp, shift, fold
    cdef Py_ssize_t i
    shift = 1
    while (<Py_ssize_t> 1 << shift) < n + 2:
        shift += 1
    for fold in range(3):
        m = 0.0
        for i in range(n):
            a = fabs(buf[i])
            if a > m:
                m = a
        if m == 0.0:
            break
        frexp(m, &exp)
        scale = ldexp(1.0, exp + shift + 1)
        partial = 0.0
        for i in range(n):
            chunk = (buf[i] + scale) - scale
            partial += chunk
            buf[i] -= chunk
        total += partial
    return total


def energy_rows(
    double[:, ::1] points,
    double[::1] weights,
    double[:, :, ::1] frames,
    long[::1] parents,
    double q,
    Py_ssize_t i0,
    Py_ssize_t i1,
    bint symmetrize=False,
):
    """Deterministic row sums of w_i w_j inv_rtp(i, j)^q for rows [i0, i1)."""
    cdef Py_ssize_t npts = points.shape[0]
    cdef int n = points.shape[1]
    cdef int m = frames.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rows = np.zeros(i1 - i0)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.zeros(npts)
    cdef double[::1] rows_v = rows
    cdef double[::1] buf = scratch
    cdef Py_ssize_t i, j
    cdef int a, b
    cdef long pi
    cdef double wi, r2, s2, s, proj, comp, k, kj, term
    cdef double d[16]
    cdef double pr[16]
    cdef long included = 0, excluded = 0
    cdef int qi = <int> (q + 0.5)
    cdef bint integral = (fabs(q - qi) < 1e-12) and (1 <= qi <= 32)

    if n > 16 or m > 16:
        raise ValueError("compiled kernel supports ambient/intrinsic dim <= 16")

    with nogil:
        for i in range(i0, i1):
            pi = parents[i]
            wi = weights[i]
            for j in range(npts):
                if parents[j] == pi:
                    if j != i:
                        excluded += 1
                    buf[j] = 0.0
                    continue
                included += 1
                r2 = 0.0
                for a in range(n):
                    d[a] = points[j, a] - points[i, a]
                    r2 += d[a] * d[a]
                for b in range(m):
                    proj = 0.0
                    for a in range(n):
                        proj += frames[i, a, b] * d[a]
                    pr[b] = proj
                s2 = 0.0
                for a in range(n):
                    comp = d[a]
                    for b in range(m):
                        comp -= frames[i, a, b] * pr[b]
                    s2 += comp * comp
                s = sqrt(s2)
                if s <= PLANE_REL_TOL * sqrt(r2):
                    k = 0.0
                else:
                    k = 2.0 * s / r2
                if symmetrize:
                    for b in range(m):
                        proj = 0.0
                        for a in range(n):
                            proj += frames[j, a, b] * d[a]
                        pr[b] = proj
                    s2 = 0.0
                    for a in range(n):
                        comp = d[a]
                        for b in range(m):
                            comp -= frames[j, a, b] * pr[b]
                        s2 += comp * comp
                    s = sqrt(s2)
                    if s <= PLANE_REL_TOL * sqrt(r2):
                        kj = 0.0
                    else:
                        kj = 2.0 * s / r2
                    k = 0.5 * (k + kj)
                if k == 0.0:
                    buf[j] = 0.0
                else:
                    term = _pow_q(k, q, qi, integral)
                    buf[j] = wi * weights[j] * term
            rows_v[i - i0] = _binned_sum(&buf[0], npts)
    return rows, included, excluded


def pair_stats_rows(
    double[:, ::1] points,
    double[:, :, ::1] frames,
    long[::1] parents,
    Py_ssize_t i0,
    Py_ssize_t i1,
):
    """Per-row max inv_rtp and min cross-parent distance for rows [i0, i1)."""
    cdef Py_ssize_t npts = points.shape[0]
    cdef int n = points.shape[1]
    cdef int m = frames.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kmax = np.zeros(i1 - i0)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dmin = np.full(i1 - i0, np.inf)
    cdef double[::1] kmax_v = kmax
    cdef double[::1] dmin_v = dmin
    cdef Py_ssize_t i, j
    cdef int a, b
    cdef long pi
    cdef double r2, s2, s, proj, comp, k
    cdef double d[16]
    cdef double pr[16]

    if n > 16 or m > 16:
        raise ValueError("compiled kernel supports ambient/intrinsic dim <= 16")

    with nogil:
        for i in range(i0, i1):
            pi = parents[i]
            for j in range(npts):
                if parents[j] == pi:
                    continue
                r2 = 0.0
                for a in range(n):
                    d[a] = points[j, a] - points[i, a]
                    r2 += d[a] * d[a]
                if r2 < dmin_v[i - i0] * dmin_v[i - i0]:
                    dmin_v[i - i0] = sqrt(r2)
                for b in range(m):
                    proj = 0.0
                    for a in range(n):
                        proj += frames[i, a, b] * d[a]
                    pr[b] = proj
                s2 = 0.0
                for a in range(n):
                    comp = d[a]
                    for b in range(m):
                        comp -= frames[i, a, b] * pr[b]
                    s2 += comp * comp
                s = sqrt(s2)
                if s <= PLANE_REL_TOL * sqrt(r2):
                    continue
                k = 2.0 * s / r2
                if k > kmax_v[i - i0]:
                    kmax_v[i - i0] = k
    return kmax, dmin
