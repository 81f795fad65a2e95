"""Clearance-distribution model of a one-dimensional traffic gas.

A stream of vehicles is treated as a gas of particles on a line whose
nearest-neighbor spacing r (the clearance, rescaled to unit mean) follows

    p(r) = A Theta(r) exp(-beta/r) exp(-B r),

where beta >= 0 is the inverse temperature of the drivers, the decay rate
B = beta + (3 - exp(-sqrt(beta)))/2 is the closure that keeps the mean
clearance near one, and 1/A = 2 sqrt(beta/B) K_1(2 sqrt(B beta)) normalizes
the density. Theta is the Heaviside step with Theta(x) = 0 for x <= 0, so
every density here is exactly zero at non-positive arguments.

The distance spanned by n+2 consecutive vehicles (n intermediate) has the
closed-form density

    p_n(r) = N_n Theta(r) r^n exp(-(beta/r)(n+1)^2) exp(-B r),
    1/N_n  = 2 ((n+1) sqrt(beta/B))^(n+1) K_{n+1}(2 (n+1) sqrt(B beta)),

a saddle-point form whose exact counterpart is the n-fold self-convolution
of p; `convolution_oracle` computes the latter on a grid to audit the
former. At beta = 0 everything degenerates to the Poisson gas: B = A = 1,
p(r) = exp(-r), and p_n is the Gamma(n+1) density.

Moments and normalizations are available both in closed Bessel form and
through adaptive quadrature so the two routes can cross-check each other,
and `sample_spacings` draws seeded clearances by rejection from a two-piece
envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels, specfun

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class GasParameters:
    """The triple (beta, B, log A) defining the clearance density."""

    beta: float
    B: float
    log_A: float


@dataclass(frozen=True)
class NthSpacingDensity:
    """Closed-form density of the span of n+1 consecutive clearances."""

    n: int
    beta: float
    B: float
    log_N: float


@dataclass(frozen=True, eq=False)
class SpacingSequence:
    """An ordered batch of positive spacings.

    `unfolded()` rescales so the mean is exactly one, the normalization
    every rigidity estimator expects.
    """

    spacings: np.ndarray

    @property
    def count(self) -> int:
        return int(self.spacings.size)

    @property
    def mean(self) -> float:
        return float(self.spacings.mean())

    def unfolded(self) -> "SpacingSequence":
        s = np.asarray(self.spacings, dtype=float)
        return SpacingSequence(s * (s.size / s.sum()))


def _decay_rate(beta: float) -> float:
    return beta + (3.0 - math.exp(-math.sqrt(beta))) / 2.0


def _log_norm_and_mean_ratio(n: int, beta: float, B: float) -> tuple[float, float]:
    """log N_n and mean(p_n)/(n+1) from one log-space Bessel recurrence."""
    if beta == 0.0:
        return (n + 1.0) * math.log(B) - math.lgamma(n + 1.0), 1.0 / B
    half_log = 0.5 * (math.log(beta) - math.log(B))
    x = 2.0 * (n + 1.0) * math.sqrt(B * beta)
    seq = specfun._log_scaled_seq(n + 2, x)
    log_norm = -(_LN2 + (n + 1.0) * (math.log(n + 1.0) + half_log) + seq[n + 1] - x)
    mean_ratio = math.exp(half_log + seq[n + 2] - seq[n + 1])
    return log_norm, mean_ratio


def make_gas(beta: float) -> GasParameters:
    """Gas parameters for inverse temperature beta >= 0.

    beta = 0 is the Poisson endpoint with B = A = 1 taken analytically.
    """
    beta = float(beta)
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a finite non-negative real, got {beta!r}")
    B = _decay_rate(beta)
    log_norm, _ = _log_norm_and_mean_ratio(0, beta, B)
    return GasParameters(beta, B, log_norm)


def _pdf_eval(n, beta, B, log_norm, r):
    arr = np.asarray(r, dtype=float)
    pos = arr > 0
    safe = np.where(pos, arr, 1.0)
    with np.errstate(under="ignore"):
        expo = log_norm + n * np.log(safe) - beta * (n + 1.0) ** 2 / safe - B * safe
        vals = np.where(pos, np.exp(expo), 0.0)
    if np.ndim(r) == 0:
        return float(vals)
    return vals


def clearance_pdf(params: GasParameters, r):
    """p(r) at a scalar or array of points; exactly 0 for r <= 0."""
    return _pdf_eval(0, params.beta, params.B, params.log_A, r)


@lru_cache(maxsize=4096)
def nth_density(n: int, beta: float) -> NthSpacingDensity:
    """Parameters of the closed-form n-th neighbor density."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise ValueError(f"n must be a non-negative integer, got {n!r}")
    beta = float(beta)
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a finite non-negative real, got {beta!r}")
    B = _decay_rate(beta)
    log_norm, _ = _log_norm_and_mean_ratio(int(n), beta, B)
    return NthSpacingDensity(int(n), beta, B, log_norm)


def nth_pdf(n: int, beta: float, r):
    """p_n(r); n = 0 coincides with clearance_pdf by construction."""
    d = nth_density(n, float(beta))
    return _pdf_eval(d.n, d.beta, d.B, d.log_N, r)


def convolution_oracle(n: int, beta: float, grid_step: float, grid_max: float):
    """Exact (up to discretization) n-fold self-convolution of p on a grid.

    Ground truth for the saddle-point form: returns (grid, density) with
    grid = {0, h, 2h, ...} up to grid_max. Raises if the clearance density
    leaves more than 1e-10 mass beyond grid_max.
    """
    if grid_step <= 0 or grid_max <= grid_step:
        raise ValueError("need 0 < grid_step < grid_max")
    params = make_gas(beta)
    # integral_R^inf p <= A exp(-B R)/B since exp(-beta/r) <= 1
    tail_bound = math.exp(params.log_A - params.B * grid_max) / params.B
    if tail_bound >= 1e-10:
        raise ValueError(
            f"grid_max={grid_max} leaves clearance tail mass <= {tail_bound:.2e}, "
            "not below 1e-10; enlarge the grid")
    m = int(round(grid_max / grid_step))
    grid = np.arange(m + 1) * grid_step
    base = clearance_pdf(params, grid)
    dens = base.copy()
    for _ in range(int(n)):
        dens = np.convolve(dens, base)[: m + 1] * grid_step
    return grid, dens


def moment(params: GasParameters, k: int) -> float:
    """E[r^k] in closed Bessel form: A 2 (beta/B)^((k+1)/2) K_{k+1}(2 sqrt(B beta))."""
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if params.beta == 0.0:
        return math.exp(math.lgamma(k + 1.0)) / params.B ** k
    x = 2.0 * math.sqrt(params.B * params.beta)
    lk = specfun.bessel_k(int(k) + 1, x).log_scaled_value
    half_log = 0.5 * (math.log(params.beta) - math.log(params.B))
    return math.exp(params.log_A + _LN2 + (k + 1.0) * half_log + lk - x)


_BATCH = 1 << 16


def sample_spacings(params: GasParameters, count: int, seed) -> SpacingSequence:
    """`count` independent draws from p(r), deterministic per seed.

    beta = 0 uses the exact inverse transform of the exponential law;
    beta > 0 uses rejection from the two-piece envelope in
    kernels.rejection_step, consuming uniforms in fixed-size batches so the
    output is reproducible for a given seed.
    """
    if not (isinstance(count, (int, np.integer)) and count >= 1):
        raise ValueError(f"count must be a positive integer, got {count!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if params.beta == 0.0:
        return SpacingSequence(-np.log1p(-rng.random(int(count))) / params.B)
    chunks, have = [], 0
    while have < count:
        u = rng.random((3, _BATCH))
        got = kernels.rejection_step(u[0], u[1], u[2], params.beta, params.B)
        chunks.append(got)
        have += got.size
    return SpacingSequence(np.concatenate(chunks)[: int(count)])


def sampler_efficiency(params: GasParameters, trials: int = 100000, seed=0) -> float:
    """Fraction of envelope proposals accepted; 1 for the beta = 0 path."""
    if params.beta == 0.0:
        return 1.0
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((3, int(trials)))
    got = kernels.rejection_step(u[0], u[1], u[2], params.beta, params.B)
    return got.size / int(trials)
