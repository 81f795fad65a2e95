"""Number variance of the traffic gas: exact coefficients and estimators.

The central statistic is the number variance Delta_N(L), the variance of
the count of particles falling in windows of length L on the unfolded
axis. Three routes to it live here:

* the closed-form large-L asymptote Delta_N(L) = chi(beta) L + gamma(beta)
  with chi and gamma rational in sqrt(B beta);
* the integral formula Delta_N(L) = L - 2 int_0^L (L-r)(1-R(r)) dr, where
  R is the two-point cluster function, the sum over n of the n-th neighbor
  spacing densities;
* the empirical estimator over disjoint windows of a sampled or measured
  spacing sequence, with the moving-average time-gap variant Delta_T(N).

The cluster sum uses the closed-form saddle densities with each term
rescaled so its mean sits exactly at n + 1 (the raw forms run a few
percent low, which would shift the integral's linear tail); truncation is
adaptive with a certified geometric tail bound. `renewal_slope_oracle`
gives the exact renewal-theory slope Var(r)/E(r)^3 from quadrature
moments as an independent cross-check of chi; the two agree at the
few-percent level, the footprint of the saddle-point approximation.

`invert_chi` maps a fitted slope back to the inverse temperature beta,
the estimator behind beta(rho) profiles of measured traffic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import gas, kernels, specfun

_MIN_WINDOWS = 10
_TAIL_RATIO = 0.9
_EXTEND_BLOCK = 64


class ClusterTruncationError(RuntimeError):
    """Cluster-sum tail could not be certified below tolerance at the term cap."""


@dataclass(frozen=True)
class AsymptoticCoefficients:
    """Slope chi and shift gamma_shift of Delta_N(L) ~ chi L + gamma_shift."""

    beta: float
    chi: float
    gamma_shift: float


@dataclass(frozen=True, eq=False)
class VarianceCurve:
    """A variance statistic on an increasing grid of scales.

    kind is "number_variance" (disjoint windows of length L over the
    unfolded axis) or "timegap_variance" (overlapping moving averages of N
    consecutive gaps). window_counts records how many windows or averages
    back each point; points with fewer than 10 windows are flagged rather
    than dropped, and carry NaN variance when no window fits at all.
    """

    scales: np.ndarray
    variances: np.ndarray
    kind: str
    sample_count: int
    window_counts: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        if self.kind not in ("number_variance", "timegap_variance"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        s = np.asarray(self.scales, dtype=float)
        if s.size == 0 or not (np.diff(s) > 0).all():
            raise ValueError("scales must be non-empty and strictly increasing")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.scales.tolist(), self.variances.tolist()))


def chi_coefficient(beta: float) -> float:
    """Slope chi(beta) = (2 + sqrt(B beta)) / (2B (1 + sqrt(B beta)))."""
    beta = float(beta)
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a finite non-negative real, got {beta!r}")
    B = gas._decay_rate(beta)
    s = math.sqrt(B * beta)
    return (2.0 + s) / (2.0 * B * (1.0 + s))


def gamma_coefficient(beta: float) -> float:
    """Shift gamma(beta), rising from 0 at beta = 0 toward 1/6."""
    beta = float(beta)
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a finite non-negative real, got {beta!r}")
    B = gas._decay_rate(beta)
    x = B * beta
    s = math.sqrt(x)
    return (6.0 * s + x * (21.0 + 4.0 * x + 16.0 * s)) / (24.0 * (1.0 + s) ** 4)


def asymptotic_coefficients(beta: float) -> AsymptoticCoefficients:
    return AsymptoticCoefficients(float(beta), chi_coefficient(beta), gamma_coefficient(beta))


def number_variance_asymptotic(beta: float, L: float) -> float:
    """chi(beta) L + gamma(beta); valid for large L, intercept only at L -> 0."""
    L = float(L)
    if not (L > 0.0 and math.isfinite(L)):
        raise ValueError(f"L must be a positive real, got {L!r}")
    return chi_coefficient(beta) * L + gamma_coefficient(beta)


class _SaddleFamily:
    """Per-beta cache of saddle-density normalizations and mean-fix scales."""

    __slots__ = ("beta", "B", "log_norms", "scales", "log_scales")

    def __init__(self, beta: float):
        self.beta = beta
        self.B = gas._decay_rate(beta)
        self.log_norms = np.empty(0)
        self.scales = np.empty(0)
        self.log_scales = np.empty(0)

    def ensure(self, count: int) -> None:
        have = self.log_norms.size
        if count <= have:
            return
        ln = np.empty(count)
        sc = np.empty(count)
        ln[:have] = self.log_norms
        sc[:have] = self.scales
        for n in range(have, count):
            ln[n], sc[n] = gas._log_norm_and_mean_ratio(n, self.beta, self.B)
        self.log_norms = ln
        self.scales = sc
        self.log_scales = np.log(sc)

    def term(self, n: int, r: np.ndarray) -> np.ndarray:
        """Single mean-corrected summand c_n p_n(c_n r)."""
        rr = self.scales[n] * r
        with np.errstate(under="ignore"):
            expo = (self.log_norms[n] + self.log_scales[n] + n * np.log(rr)
                    - self.beta * (n + 1.0) ** 2 / rr - self.B * rr)
            return np.exp(expo)


@lru_cache(maxsize=64)
def _family(beta: float) -> _SaddleFamily:
    return _SaddleFamily(beta)


def cluster_function(beta: float, r, tol: float = 1e-6):
    """Two-point cluster function R(r), the sum over n of neighbor densities.

    Each summand is the closed-form saddle density rescaled to mean exactly
    n + 1. Accepts a positive scalar or array of evaluation points. The sum
    is truncated adaptively: terms are added until the last one falls below
    tol/100 everywhere while shrinking geometrically, which bounds the
    discarded tail by tol. Raises ClusterTruncationError if that cannot be
    certified within the term cap 10 max(r) + 200.
    """
    beta = float(beta)
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a finite non-negative real, got {beta!r}")
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    arr = np.atleast_1d(np.asarray(r, dtype=float))
    if arr.size == 0 or not (arr > 0).all() or not np.isfinite(arr).all():
        raise ValueError("r must contain positive finite values")
    r_max = float(arr.max())
    n_terms = int(math.ceil(r_max + 12.0 * math.sqrt(r_max + 1.0))) + 30
    cap = int(10.0 * max(r_max, 1.0) + 200.0)
    fam = _family(beta)
    while True:
        fam.ensure(n_terms)
        t_last = fam.term(n_terms - 1, arr)
        t_prev = fam.term(n_terms - 2, arr)
        small = (t_last < tol * 1e-2).all()
        shrinking = ((t_last <= _TAIL_RATIO * t_prev) | (t_last == 0.0)).all()
        if small and shrinking:
            break
        if n_terms >= cap:
            raise ClusterTruncationError(
                f"cluster sum at beta={beta}, r_max={r_max:g} not certified below "
                f"tol={tol:g} within {cap} terms")
        n_terms = min(n_terms + _EXTEND_BLOCK, cap)
    total = kernels.cluster_sum(
        arr, fam.scales[:n_terms], fam.log_norms[:n_terms], beta, fam.B)
    if np.ndim(r) == 0:
        return float(total[0])
    return total


def number_variance_integral(beta: float, L: float, tol: float = 1e-6) -> float:
    """Delta_N(L) = L - 2 int_0^L (L - r)(1 - R(r)) dr by adaptive quadrature."""
    L = float(L)
    if not (L > 0.0 and math.isfinite(L)):
        raise ValueError(f"L must be a positive real, got {L!r}")

    def kernel(rr: np.ndarray) -> np.ndarray:
        return (L - rr) * (1.0 - cluster_function(beta, rr, tol))

    return L - 2.0 * specfun.integrate_finite(kernel, 0.0, L)


def empirical_number_variance(seq: gas.SpacingSequence, L_grid) -> VarianceCurve:
    """Window-count variance of an unfolded spacing sequence.

    Positions are prefix sums of the spacings, origin included. For each L
    the span [0, Q] splits into floor(Q/L) disjoint windows; a position on
    a window edge counts to the right. Grid points backed by fewer than 10
    windows are flagged, not dropped.
    """
    spacings = np.asarray(seq.spacings, dtype=float)
    if spacings.size == 0:
        raise ValueError("spacing sequence is empty")
    L_arr = np.asarray(L_grid, dtype=float)
    if L_arr.ndim != 1 or L_arr.size == 0 or not (L_arr > 0).all():
        raise ValueError("L_grid must be a non-empty 1-D grid of positive scales")
    positions = np.concatenate([[0.0], np.cumsum(spacings)])
    Q = spacings.size
    variances = np.empty(L_arr.size)
    counts = np.empty(L_arr.size, dtype=np.int64)
    for i, L in enumerate(L_arr):
        m = int(Q // L)
        counts[i] = m
        if m == 0:
            variances[i] = math.nan
            continue
        n_k = kernels.window_counts(positions, float(L), m)
        d = n_k - L
        variances[i] = float(d @ d) / m
    return VarianceCurve(
        scales=L_arr,
        variances=variances,
        kind="number_variance",
        sample_count=Q,
        window_counts=counts,
        flags=counts < _MIN_WINDOWS,
    )


def timegap_variance(gaps, N_grid) -> VarianceCurve:
    """Variance of overlapping moving averages of N consecutive gaps.

    Delta_T(N) = (1/(Q-N+1)) sum_k (T_k^(N) - Tbar)^2 over all windows
    k = 1..Q-N+1, with Tbar the global mean gap. Requires Q >= 10 max(N).
    """
    g = np.asarray(gaps, dtype=float)
    if g.ndim != 1 or g.size == 0 or not (g > 0).all():
        raise ValueError("gaps must be a non-empty 1-D sequence of positive reals")
    N_arr = np.asarray(N_grid)
    if (N_arr.ndim != 1 or N_arr.size == 0
            or not np.issubdtype(N_arr.dtype, np.integer) or not (N_arr >= 1).all()):
        raise ValueError("N_grid must be a non-empty 1-D grid of positive integers")
    Q = g.size
    n_max = int(N_arr.max())
    if Q < n_max * _MIN_WINDOWS:
        raise ValueError(
            f"need at least {n_max * _MIN_WINDOWS} gaps for max(N_grid)={n_max}, got {Q}")
    variances = np.array([kernels.moving_average_variance(g, int(N)) for N in N_arr])
    return VarianceCurve(
        scales=N_arr.astype(float),
        variances=variances,
        kind="timegap_variance",
        sample_count=Q,
        window_counts=Q - N_arr.astype(np.int64) + 1,
        flags=np.zeros(N_arr.size, dtype=bool),
    )


def fit_linear_tail(curve: VarianceCurve, L_min: float = 10.0) -> tuple[float, float, float]:
    """OLS line through the unflagged tail scale >= L_min.

    Returns (slope, intercept, RMS residual); needs at least 4 usable points.
    """
    keep = (curve.scales >= L_min) & ~curve.flags & np.isfinite(curve.variances)
    if int(keep.sum()) < 4:
        raise ValueError(
            f"need at least 4 unflagged points with scale >= {L_min}, have {int(keep.sum())}")
    x = curve.scales[keep]
    y = curve.variances[keep]
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rms = math.sqrt(float(resid @ resid) / x.size)
    return float(coef[0]), float(coef[1]), rms


def fit_power_law(curve: VarianceCurve) -> tuple[float, float]:
    """Least squares in log-log coordinates; returns (exponent, prefactor)."""
    v = curve.variances
    if not (np.isfinite(v).all() and (v > 0).all()):
        raise ValueError(
            "all variances must be strictly positive; trim zero, negative or "
            "flagged points before fitting")
    design = np.column_stack([np.log(curve.scales), np.ones(curve.scales.size)])
    coef, *_ = np.linalg.lstsq(design, np.log(v), rcond=None)
    return float(coef[0]), float(math.exp(coef[1]))


_CHI_GRID_STEP = 1e-2
_monotonicity_checked: set[float] = set()


def _verify_chi_monotone(beta_cap: float) -> None:
    if beta_cap in _monotonicity_checked:
        return
    grid = np.arange(0.0, beta_cap + _CHI_GRID_STEP, _CHI_GRID_STEP)
    B = grid + (3.0 - np.exp(-np.sqrt(grid))) / 2.0
    s = np.sqrt(B * grid)
    vals = (2.0 + s) / (2.0 * B * (1.0 + s))
    if not (np.diff(vals) < 0).all():
        raise RuntimeError(f"chi is not strictly decreasing on [0, {beta_cap}]")
    _monotonicity_checked.add(beta_cap)


def invert_chi(chi_hat: float, beta_cap: float = 64.0) -> float:
    """beta solving chi(beta) = chi_hat by bisection on [0, beta_cap].

    chi_hat must lie in (chi(beta_cap), 1]; monotone decrease of chi over
    the bracket is verified (once per cap) before bisecting. Converges to
    1e-8 in beta.
    """
    c = float(chi_hat)
    floor_val = chi_coefficient(beta_cap)
    if not (floor_val < c <= 1.0):
        raise ValueError(
            f"chi_hat must lie in ({floor_val:.8f}, 1] for beta_cap={beta_cap:g}, got {c!r}")
    _verify_chi_monotone(beta_cap)
    if c == 1.0:
        return 0.0
    lo, hi = 0.0, float(beta_cap)
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if chi_coefficient(mid) > c:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def renewal_slope_oracle(beta: float) -> float:
    """Exact large-L number-variance slope Var(r)/E(r)^3 of the renewal gas.

    Moments come from semi-infinite quadrature of the clearance density,
    independent of the closed Bessel forms, so the gap to chi_coefficient
    isolates the saddle-point approximation behind Eq. chi.
    """
    params = gas.make_gas(beta)

    def weighted(power: int):
        def f(rr: np.ndarray) -> np.ndarray:
            return rr ** power * gas.clearance_pdf(params, rr)
        return f

    m1 = specfun.integrate_semiinfinite(weighted(1))
    m2 = specfun.integrate_semiinfinite(weighted(2))
    return (m2 - m1 * m1) / m1 ** 3
