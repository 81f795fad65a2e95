# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels; mirrors _py exactly."""

from libc.math cimport exp, floor, log, log1p, sqrt

import numpy as np


def rejection_step(double[::1] u_branch, double[::1] u_pos,
                   double[::1] u_accept, double beta, double B):
    cdef Py_ssize_t i, k = 0, m = u_branch.shape[0]
    cdef double s = sqrt(B * beta)
    cdef double r_c = 2.0 * sqrt(beta / B)
    cdef double p_cap = 2.0 * s / (2.0 * s + 1.0)
    cdef double r, log_ratio
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(m):
        if u_branch[i] < p_cap:
            r = u_pos[i] * r_c
            if r <= 0.0:
                continue
            log_ratio = 2.0 * s - beta / r - B * r
        else:
            r = r_c - log1p(-u_pos[i]) / B
            log_ratio = -beta / r
        if u_accept[i] < exp(log_ratio):
            out[k] = r
            k += 1
    return out_arr[:k].copy()


def window_counts(double[::1] positions, double L, Py_ssize_t n_windows):
    cdef Py_ssize_t i, idx
    out_arr = np.zeros(n_windows, dtype=np.int64)
    cdef long long[::1] out = out_arr
    for i in range(positions.shape[0]):
        idx = <Py_ssize_t>floor(positions[i] / L)
        if 0 <= idx < n_windows:
            out[idx] += 1
    return out_arr


def moving_average_variance(double[::1] gaps, Py_ssize_t N):
    cdef Py_ssize_t i, Q = gaps.shape[0]
    cdef double run = 0.0, tbar = 0.0, acc, d
    for i in range(Q):
        tbar += gaps[i]
    tbar /= Q
    for i in range(N):
        run += gaps[i]
    d = run / N - tbar
    acc = d * d
    for i in range(N, Q):
        run += gaps[i] - gaps[i - N]
        d = run / N - tbar
        acc += d * d
    return acc / (Q - N + 1)


def cluster_sum(double[::1] r, double[::1] scales, double[::1] log_norms,
                double beta, double B):
    cdef Py_ssize_t i, n, m = r.shape[0], terms = log_norms.shape[0]
    cdef double c, lc, rr, target
    out_arr = np.zeros(m, dtype=np.float64)
    logr_arr = np.log(np.asarray(r))
    cdef double[::1] out = out_arr
    cdef double[::1] logr = logr_arr
    for n in range(terms):
        c = scales[n]
        lc = log(c)
        target = beta * (n + 1.0) * (n + 1.0)
        for i in range(m):
            rr = c * r[i]
            out[i] += exp(log_norms[n] + n * (lc + logr[i])
                          - target / rr - B * rr + lc)
    return out_arr
