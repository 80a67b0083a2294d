# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled leave-one-out Beta-kernel primitives.

Mirrors ``_kernels_py`` function for function, including the numerics
policy (direct row summation unless an off-diagonal log density falls below
LSE_CUTOFF, in which case the row is shifted by its off-diagonal maximum).
Rows of the kernel matrix are independent, so the outer loop parallelizes
with OpenMP; every row writes to its own output slot and the remaining
reductions run in a fixed order, so sequential and parallel runs agree.

Row work is organized as branch-free passes over contiguous index segments
on either side of the diagonal, which keeps the inner loops vectorizable.
"""

from cython.parallel cimport parallel, prange
cimport openmp
from libc.math cimport exp, log, log1p, lgamma, fabs, INFINITY

import numpy as np

IS_COMPILED = True

LSE_CUTOFF = -30.0
cdef double _CUTOFF = -30.0

# Arguments to exp below this are clamped up to it. exp(-708) is a normal
# double near 3.3e-308, invisible next to the row maximum of exp(0) = 1,
# and keeping every lane inside the vector math library's fast range avoids
# its per-vector scalar fallback for extreme inputs (an order-of-magnitude
# row cost at small bandwidths). The fallback backend clamps identically.
EXP_FLOOR = -708.0
cdef double _EXP_FLOOR = -708.0


cdef void _fill_segment(Py_ssize_t lo, Py_ssize_t hi, double log_s, double log_1ms,
                        const double* a, const double* g, const double* norm,
                        double* buf, double* io_min, double* io_max) noexcept nogil:
    # Log kernel values for centers in [lo, hi), folding running extrema.
    cdef Py_ssize_t u
    cdef double e
    cdef double mn = io_min[0]
    cdef double mx = io_max[0]
    for u in range(lo, hi):
        e = a[u] * log_s + g[u] * log_1ms - norm[u]
        buf[u] = e
        mn = e if e < mn else mn
        mx = e if e > mx else mx
    io_min[0] = mn
    io_max[0] = mx


cdef void _accum_segment(Py_ssize_t lo, Py_ssize_t hi, double shift, const double* z,
                         const double* buf, double* io_den, double* io_num) noexcept nogil:
    cdef Py_ssize_t u
    cdef double k
    cdef double den = io_den[0]
    cdef double num = io_num[0]
    cdef double e
    for u in range(lo, hi):
        e = buf[u] - shift
        k = exp(e if e > _EXP_FLOOR else _EXP_FLOOR)
        den += k
        num += k * z[u]
    io_den[0] = den
    io_num[0] = num


cdef double _sumexp_segment(Py_ssize_t lo, Py_ssize_t hi, double shift,
                            const double* buf) noexcept nogil:
    cdef Py_ssize_t u
    cdef double e
    cdef double total = 0.0
    for u in range(lo, hi):
        e = buf[u] - shift
        total += exp(e if e > _EXP_FLOOR else _EXP_FLOOR)
    return total


cdef void _grad_accum_segment(Py_ssize_t lo, Py_ssize_t hi, double shift,
                              const double* s, const double* z, double* buf,
                              double* io) noexcept nogil:
    # io holds [den, num, t1, t2]; kernel values overwrite buf for reuse.
    cdef Py_ssize_t u
    cdef double k
    cdef double den = io[0]
    cdef double num = io[1]
    cdef double t1 = io[2]
    cdef double t2 = io[3]
    cdef double e
    for u in range(lo, hi):
        e = buf[u] - shift
        k = exp(e if e > _EXP_FLOOR else _EXP_FLOOR)
        buf[u] = k
        den += k
        num += k * z[u]
        t1 += k * s[u] * z[u]
        t2 += k * s[u]
    io[0] = den
    io[1] = num
    io[2] = t1
    io[3] = t2


cdef void _scatter_segment(Py_ssize_t lo, Py_ssize_t hi, Py_ssize_t w,
                           double w1, double w2, double w3, double w4,
                           const double* buf, double* acc) noexcept nogil:
    cdef Py_ssize_t u
    cdef double k
    for u in range(lo, hi):
        k = buf[u]
        acc[u] += k * w1
        acc[w + u] += k * w2
        acc[2 * w + u] += k * w3
        acc[3 * w + u] += k * w4


cdef void _row_residual(Py_ssize_t v, Py_ssize_t w, const double* s, const double* z,
                        const double* a, const double* g, const double* norm,
                        double* buf, double* resid) noexcept nogil:
    cdef double row_min = INFINITY
    cdef double row_max = -INFINITY
    cdef double den = 0.0
    cdef double num = 0.0
    cdef double shift
    cdef double log_s = log(s[v])
    cdef double log_1ms = log1p(-s[v])
    _fill_segment(0, v, log_s, log_1ms, a, g, norm, buf, &row_min, &row_max)
    _fill_segment(v + 1, w, log_s, log_1ms, a, g, norm, buf, &row_min, &row_max)
    shift = row_max if row_min < _CUTOFF else 0.0
    _accum_segment(0, v, shift, z, buf, &den, &num)
    _accum_segment(v + 1, w, shift, z, buf, &den, &num)
    resid[v] = fabs(num / den - s[v])


cdef double _row_loglik(Py_ssize_t v, Py_ssize_t w, const double* s,
                        const double* a, const double* g, const double* norm,
                        double* buf) noexcept nogil:
    cdef double row_min = INFINITY
    cdef double row_max = -INFINITY
    cdef double log_s = log(s[v])
    cdef double log_1ms = log1p(-s[v])
    cdef double total
    _fill_segment(0, v, log_s, log_1ms, a, g, norm, buf, &row_min, &row_max)
    _fill_segment(v + 1, w, log_s, log_1ms, a, g, norm, buf, &row_min, &row_max)
    total = _sumexp_segment(0, v, row_max, buf) + _sumexp_segment(v + 1, w, row_max, buf)
    return row_max + log(total)


cdef double _row_query(Py_ssize_t w, double q, const double* z,
                       const double* a, const double* g, const double* norm,
                       double* buf) noexcept nogil:
    cdef double row_min = INFINITY
    cdef double row_max = -INFINITY
    cdef double den = 0.0
    cdef double num = 0.0
    cdef double shift
    _fill_segment(0, w, log(q), log1p(-q), a, g, norm, buf, &row_min, &row_max)
    shift = row_max if row_min < _CUTOFF else 0.0
    _accum_segment(0, w, shift, z, buf, &den, &num)
    return num / den


cdef void _row_grad(Py_ssize_t v, Py_ssize_t w, const double* s, const double* z,
                    const double* a, const double* g, const double* norm,
                    const double* rho, const double* phi,
                    double* buf, double* resid, double* direct, double* acc) noexcept nogil:
    # acc is this thread's scratch laid out as [A | B | C | D], each w wide.
    cdef double row_min = INFINITY
    cdef double row_max = -INFINITY
    cdef double shift, ratio, delta, sigma, w1, w2, w3, w4, t1, t2
    cdef double io[4]
    cdef double log_s = log(s[v])
    cdef double log_1ms = log1p(-s[v])
    _fill_segment(0, v, log_s, log_1ms, a, g, norm, buf, &row_min, &row_max)
    _fill_segment(v + 1, w, log_s, log_1ms, a, g, norm, buf, &row_min, &row_max)
    shift = row_max if row_min < _CUTOFF else 0.0
    io[0] = 0.0
    io[1] = 0.0
    io[2] = 0.0
    io[3] = 0.0
    _grad_accum_segment(0, v, shift, s, z, buf, io)
    _grad_accum_segment(v + 1, w, shift, s, z, buf, io)
    ratio = io[1] / io[0]
    delta = ratio - s[v]
    resid[v] = fabs(delta)
    sigma = (delta > 0.0) - (delta < 0.0)
    t1 = io[2] - s[v] * io[1]
    t2 = io[3] - s[v] * io[0]
    direct[v] = sigma * (phi[v] * (t1 - ratio * t2) / io[0] - 1.0)
    w1 = sigma * rho[v] / io[0]
    w2 = sigma / io[0]
    w3 = w1 * ratio
    w4 = w2 * ratio
    _scatter_segment(0, v, w, w1, w2, w3, w4, buf, acc)
    _scatter_segment(v + 1, w, w, w1, w2, w3, w4, buf, acc)


def _shape_terms(double[::1] centers, double bandwidth):
    cdef Py_ssize_t w = centers.shape[0]
    a_np = np.empty(w)
    g_np = np.empty(w)
    norm_np = np.empty(w)
    cdef double[::1] a = a_np
    cdef double[::1] g = g_np
    cdef double[::1] norm = norm_np
    cdef double const_term = lgamma(1.0 / bandwidth + 2.0)
    cdef Py_ssize_t u
    for u in range(w):
        a[u] = centers[u] / bandwidth
        g[u] = (1.0 - centers[u]) / bandwidth
        norm[u] = lgamma(a[u] + 1.0) + lgamma(g[u] + 1.0) - const_term
    return a_np, g_np, norm_np


cdef int _resolve(int num_threads) noexcept:
    if num_threads > 0:
        return num_threads
    return openmp.omp_get_max_threads()


def loo_residuals(double[::1] scores, double[::1] correctness, double bandwidth, int num_threads=1):
    """Per-sample |loo_ratio_v - s_v| for the leave-one-out estimator."""
    cdef Py_ssize_t w = scores.shape[0]
    cdef int nt = _resolve(num_threads)
    a_np, g_np, norm_np = _shape_terms(scores, bandwidth)
    cdef double[::1] a = a_np
    cdef double[::1] g = g_np
    cdef double[::1] norm = norm_np
    resid_np = np.empty(w)
    cdef double[::1] resid = resid_np
    bufs_np = np.empty((nt, w))
    cdef double[:, ::1] bufs = bufs_np
    cdef Py_ssize_t v
    cdef int tid
    with nogil, parallel(num_threads=nt):
        tid = openmp.omp_get_thread_num()
        for v in prange(w, schedule='static'):
            _row_residual(v, w, &scores[0], &correctness[0], &a[0], &g[0], &norm[0],
                          &bufs[tid, 0], &resid[0])
    return resid_np


def loo_loglik(double[::1] scores, double bandwidth, int num_threads=1):
    """Leave-one-out log-likelihood objective for bandwidth selection."""
    cdef Py_ssize_t w = scores.shape[0]
    cdef int nt = _resolve(num_threads)
    a_np, g_np, norm_np = _shape_terms(scores, bandwidth)
    cdef double[::1] a = a_np
    cdef double[::1] g = g_np
    cdef double[::1] norm = norm_np
    lse_np = np.empty(w)
    cdef double[::1] lse = lse_np
    bufs_np = np.empty((nt, w))
    cdef double[:, ::1] bufs = bufs_np
    cdef Py_ssize_t v
    cdef int tid
    with nogil, parallel(num_threads=nt):
        tid = openmp.omp_get_thread_num()
        for v in prange(w, schedule='static'):
            lse[v] = _row_loglik(v, w, &scores[0], &a[0], &g[0], &norm[0], &bufs[tid, 0])
    return float(np.sum(lse_np) - w * np.log(w - 1.0))


def cond_expect(double[::1] scores, double[::1] correctness, double[::1] queries,
                double bandwidth, int num_threads=1):
    """Kernel-smoothed E[correctness | score = q] at each query point."""
    cdef Py_ssize_t w = scores.shape[0]
    cdef Py_ssize_t n_q = queries.shape[0]
    cdef int nt = _resolve(num_threads)
    a_np, g_np, norm_np = _shape_terms(scores, bandwidth)
    cdef double[::1] a = a_np
    cdef double[::1] g = g_np
    cdef double[::1] norm = norm_np
    out_np = np.empty(n_q)
    cdef double[::1] out = out_np
    bufs_np = np.empty((nt, w))
    cdef double[:, ::1] bufs = bufs_np
    cdef Py_ssize_t v
    cdef int tid
    with nogil, parallel(num_threads=nt):
        tid = openmp.omp_get_thread_num()
        for v in prange(n_q, schedule='static'):
            out[v] = _row_query(w, queries[v], &correctness[0], &a[0], &g[0], &norm[0],
                                &bufs[tid, 0])
    return out_np


def loo_grad(double[::1] scores, double[::1] correctness, double bandwidth,
             double[::1] kappa, int num_threads=1):
    """Residuals plus the gradient of the mean residual w.r.t. every score.

    ``kappa`` is the derivative of each kernel's log-normalizer with respect
    to its center, precomputed by the caller. Cross terms accumulate into
    per-thread arrays that are reduced in thread order afterwards, so the
    result is deterministic for a given thread count.
    """
    cdef Py_ssize_t w = scores.shape[0]
    cdef int nt = _resolve(num_threads)
    a_np, g_np, norm_np = _shape_terms(scores, bandwidth)
    cdef double[::1] a = a_np
    cdef double[::1] g = g_np
    cdef double[::1] norm = norm_np

    s_arr = np.asarray(scores)
    rho_np = (np.log(s_arr) - np.log1p(-s_arr)) / bandwidth
    phi_np = 1.0 / (bandwidth * s_arr * (1.0 - s_arr))
    cdef double[::1] rho = rho_np
    cdef double[::1] phi = phi_np

    resid_np = np.empty(w)
    direct_np = np.empty(w)
    cdef double[::1] resid = resid_np
    cdef double[::1] direct = direct_np
    bufs_np = np.empty((nt, w))
    cdef double[:, ::1] bufs = bufs_np
    acc_np = np.zeros((nt, 4 * w))
    cdef double[:, ::1] acc = acc_np

    cdef Py_ssize_t v
    cdef int tid
    with nogil, parallel(num_threads=nt):
        tid = openmp.omp_get_thread_num()
        for v in prange(w, schedule='static'):
            _row_grad(v, w, &scores[0], &correctness[0], &a[0], &g[0], &norm[0],
                      &rho[0], &phi[0], &bufs[tid, 0], &resid[0], &direct[0],
                      &acc[tid, 0])

    acc_total = np.zeros(4 * w)
    for t in range(nt):
        acc_total += acc_np[t]
    part_a = acc_total[:w]
    part_b = acc_total[w:2 * w]
    part_c = acc_total[2 * w:3 * w]
    part_d = acc_total[3 * w:]

    z_arr = np.asarray(correctness)
    kap = np.asarray(kappa)
    cross = z_arr * part_a - part_c - kap * (z_arr * part_b - part_d)
    grad = (direct_np + cross) / w
    return resid_np, grad
