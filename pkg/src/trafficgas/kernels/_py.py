"""Numpy implementations of the hot kernels (reference backend)."""

import numpy as np


def rejection_step(u_branch, u_pos, u_accept, beta, B):
    """One rejection pass over pre-drawn uniforms; returns accepted clearances.

    Envelope for the unnormalized target exp(-beta/r - B r): a flat cap of
    height exp(-2 sqrt(B beta)) on [0, r_c) with r_c = 2 sqrt(beta/B), and
    the exponential tail exp(-B (r - r_c)) scaled to match at r_c. With
    B r_c = 2 sqrt(B beta) the tail acceptance ratio reduces to
    exp(-beta/r). The three uniform arrays come from the caller's generator
    so every backend consumes the random stream identically.
    """
    s = np.sqrt(B * beta)
    r_c = 2.0 * np.sqrt(beta / B)
    p_cap = 2.0 * s / (2.0 * s + 1.0)
    cap = u_branch < p_cap
    with np.errstate(divide="ignore"):
        r = np.where(cap, u_pos * r_c, r_c - np.log1p(-u_pos) / B)
        log_ratio = np.where(cap, 2.0 * s - beta / r - B * r, -beta / r)
    accepted = u_accept < np.exp(log_ratio)
    return r[accepted]


def window_counts(positions, L, n_windows):
    """Occupancy of the disjoint windows [k L, (k+1) L), k = 0..n_windows-1.

    A position exactly on an edge counts to the right window; positions at
    or beyond n_windows * L are ignored.
    """
    idx = np.floor_divide(positions, L).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < n_windows)]
    return np.bincount(idx, minlength=int(n_windows))


def moving_average_variance(gaps, N):
    """Variance of the N-point moving averages around the global mean."""
    gaps = np.asarray(gaps, dtype=np.float64)
    Q = gaps.size
    c = np.concatenate(([0.0], np.cumsum(gaps)))
    win = (c[N:] - c[:-N]) / N
    d = win - c[-1] / Q
    return float(d @ d) / d.size


def cluster_sum(r, scales, log_norms, beta, B):
    """Sum over n of the rescaled n-th neighbor densities at the points r.

    Term n is c_n * p_n(c_n r) evaluated in log space, where p_n has
    normalization exp(log_norms[n]) and c_n = scales[n] restores the exact
    mean n+1. All entries of r must be positive.
    """
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    logr = np.log(r)
    log_c = np.log(scales)
    for n in range(len(log_norms)):
        rr = scales[n] * r
        expo = (log_norms[n] + n * (log_c[n] + logr)
                - beta * (n + 1.0) ** 2 / rr - B * rr + log_c[n])
        out += np.exp(expo)
    return out
