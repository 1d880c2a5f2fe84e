"""Stable processes, (truncated) stable subordinators, subordinated
Brownian motion, and their closed-form analytics.

Conventions.  "Brownian motion" runs at generator Laplacian, i.e. variance
2s per coordinate at time s (so its transition density over time r is
(4 pi r)^(-d/2) exp(-|x-y|^2 / 4r)).  All alpha-stable motions have
generator -speed * (-Laplacian)^(alpha/2) with speed = sigma_alpha *
I^(alpha-2); equivalently characteristic function exp(-speed t |xi|^alpha).
The truncated subordinator R has Levy density

    (alpha/2) K^(alpha/2) I^(alpha-2) y^(-1-alpha/2) on [0, K I^2],

with K = (2-alpha)/alpha, which makes E[R_s] = s exactly and makes the
arrival rate of above-truncation jumps in the full subordinator exactly
I^(-2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .params import DomainError, ModelParams
from .rng import Stream, numpy_rng

__all__ = [
    "sample_stable_increment", "one_sided_stable",
    "SubordinatorPath", "sample_truncated_subordinator",
    "large_jump_arrivals", "large_jump_size", "laplace_transform",
    "neg_moment_bound", "heat_kernel", "sample_subordinated_bm",
    "levy_density_prefactor", "bulk_truncated_increments",
]


def levy_density_prefactor(params: ModelParams) -> float:
    """c in the Levy density c * y^(-1-alpha/2) of the sped-up subordinator."""
    if params.is_brownian:
        raise DomainError("no subordinator in the Brownian case")
    a = params.alpha
    K = (2.0 - a) / a
    return (a / 2.0) * K ** (a / 2.0) * params.I_val ** (a - 2.0)


def one_sided_stable(rho: float, stream: Stream) -> float:
    """Positive stable draw with Laplace transform exp(-lambda^rho).

    Kanter's representation: S = (a(pi U) / W)^((1-rho)/rho) with U uniform
    on (0,1), W unit exponential and a the Zolotarev function
    a(u) = [sin(rho u)^rho sin((1-rho)u)^(1-rho) / sin(u)]^(1/(1-rho)).
    """
    if not 0.0 < rho < 1.0:
        raise DomainError(f"one-sided stable requires rho in (0,1), got {rho}")
    u = math.pi * stream.uniform()
    w = stream.exponential()
    a = (math.sin(rho * u) ** rho * math.sin((1.0 - rho) * u) ** (1.0 - rho)
         / math.sin(u)) ** (1.0 / (1.0 - rho))
    return (a / w) ** ((1.0 - rho) / rho)


def _standard_symmetric_stable(alpha: float, stream: Stream) -> float:
    """Chambers-Mallows-Stuck draw, characteristic function exp(-|t|^alpha)."""
    u = math.pi * (stream.uniform() - 0.5)
    w = stream.exponential()
    return (math.sin(alpha * u) / math.cos(u) ** (1.0 / alpha)) * (
        math.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)


def sample_stable_increment(params: ModelParams, dt: float, dim: int,
                            stream: Stream) -> np.ndarray:
    """Increment of the isotropic stable process over dt.

    1d uses Chambers-Mallows-Stuck; d >= 2 draws sqrt(2 S) Z with S a
    one-sided stable time change (isotropic stable laws in d >= 2 have no
    direct CMS analogue).  alpha = 2 is the matching Gaussian.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if params.is_brownian:
        sd = math.sqrt(2.0 * params.speed * dt)
        return np.array([sd * z for z in _normals(stream, dim)])
    scale = (params.speed * dt) ** (1.0 / params.alpha)
    if dim == 1:
        return np.array([scale * _standard_symmetric_stable(params.alpha, stream)])
    s = one_sided_stable(params.alpha / 2.0, stream)
    sd = scale * math.sqrt(2.0 * s)
    return np.array([sd * z for z in _normals(stream, dim)])


def _normals(stream: Stream, dim: int):
    out = []
    while len(out) < dim:
        out.extend(stream.normal_pair())
    return out[:dim]


@dataclass
class SubordinatorPath:
    """Jump-time/size record plus small-jump drift for one path."""

    horizon: float
    resolution_delta: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    drift_rate: float

    def value_at(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("t must be >= 0")
        t = min(t, self.horizon)
        mask = self.jump_times <= t
        return self.drift_rate * t + float(self.jump_sizes[mask].sum())

    def values_at(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        csum = np.concatenate([[0.0], np.cumsum(self.jump_sizes)])
        idx = np.searchsorted(self.jump_times, times, side="right")
        return self.drift_rate * times + csum[idx]


def _trunc_constants(params: ModelParams, delta: float):
    c = levy_density_prefactor(params)
    rho = params.alpha / 2.0
    M = params.trunc_level
    if not 0.0 < delta < M:
        raise DomainError(f"resolution_delta must lie in (0, {M}), got {delta}")
    rate = c * (2.0 / params.alpha) * (delta ** -rho - M ** -rho)
    drift = c * delta ** (1.0 - rho) / (1.0 - rho)
    return c, rho, M, rate, drift


def default_resolution_delta(params: ModelParams) -> float:
    return params.trunc_level * 1e-4


def sample_truncated_subordinator(params: ModelParams, horizon: float,
                                  resolution_delta: Optional[float] = None,
                                  stream: Optional[Stream] = None,
                                  seed: int = 0) -> SubordinatorPath:
    """Compound-Poisson path of jumps in [delta, M] plus compensating drift.

    Jumps below delta are replaced by their mean drift c*delta^(1-a/2)/(1-a/2),
    so drift + jump mean is exactly 1 per unit time for any delta.
    """
    if horizon < 0.0:
        raise ValueError("horizon must be >= 0")
    if resolution_delta is None:
        resolution_delta = default_resolution_delta(params)
    _, rho, M, rate, drift = _trunc_constants(params, resolution_delta)
    if stream is None:
        stream = Stream(seed)
    n = stream.poisson(rate * horizon)
    times = np.sort(stream.uniforms(n)) * horizon if n else np.empty(0)
    inv_a = resolution_delta ** -rho
    inv_b = inv_a - M ** -rho
    sizes = ((inv_a - stream.uniforms(n) * inv_b) ** (-1.0 / rho)
             if n else np.empty(0))
    return SubordinatorPath(horizon, resolution_delta, times, sizes, drift)


def bulk_truncated_increments(params: ModelParams, s: float, n: int,
                              resolution_delta: Optional[float] = None,
                              seed: int = 0) -> np.ndarray:
    """n independent values of R_s, vectorized (for statistical suites).

    Work is chunked so the total jump count (which grows like
    delta^(-alpha/2) * s * n) never materializes at once.
    """
    if resolution_delta is None:
        resolution_delta = default_resolution_delta(params)
    _, rho, M, rate, drift = _trunc_constants(params, resolution_delta)
    rng = numpy_rng(seed, 0xB01C)
    inv_a = resolution_delta ** -rho
    inv_b = inv_a - M ** -rho
    total = np.full(n, drift * s)
    chunk = max(1, int(2e7 / max(rate * s, 1.0)))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        counts = rng.poisson(rate * s, size=hi - lo)
        m = int(counts.sum())
        if m:
            u = rng.random(m)
            sizes = (inv_a - u * inv_b) ** (-1.0 / rho)
            idx = np.repeat(np.arange(hi - lo), counts)
            total[lo:hi] += np.bincount(idx, weights=sizes, minlength=hi - lo)
    return total


def large_jump_arrivals(params: ModelParams, horizon: float,
                        stream: Stream) -> list[float]:
    """Poisson arrival times (rate exactly I^-2) of above-truncation jumps
    of the full subordinator over [0, horizon]."""
    if horizon < 0.0:
        raise ValueError("horizon must be >= 0")
    rate = params.large_jump_rate()
    out = []
    t = stream.exponential(1.0 / rate)
    while t < horizon:
        out.append(t)
        t += stream.exponential(1.0 / rate)
    return out


def large_jump_size(params: ModelParams, stream: Stream) -> float:
    """Size of an above-truncation jump: Pareto tail on [M, infinity)."""
    u = stream.uniform()
    return params.trunc_level * u ** (-2.0 / params.alpha)


def laplace_transform(params: ModelParams, s: float, lam: float) -> float:
    """E[exp(-lam R_s)] for the truncated subordinator; any real lam.

    For lam >= 0 the closed form with the lower incomplete gamma; for
    lam < 0 (exponential moments exist: compactly supported jumps) the
    exponent integral is evaluated by quadrature with the integrable
    singularity removed analytically.
    """
    if s < 0.0:
        raise ValueError("s must be >= 0")
    a = params.alpha
    I = params.I_val
    K = (2.0 - a) / a
    if lam == 0.0 or s == 0.0:
        return 1.0
    if lam > 0.0:
        z = K * lam * I * I
        lower_gamma = special.gammainc(1.0 - a / 2.0, z) * math.gamma(1.0 - a / 2.0)
        expo = (-(I ** -2.0) * s * (math.exp(-z) - 1.0)
                - K ** (a / 2.0) * I ** (a - 2.0) * lam ** (a / 2.0) * s
                * lower_gamma)
        return math.exp(expo)
    # lam < 0: exponent = c * int_0^M (e^{-lam y} - 1) y^{-1-a/2} dy; split
    # off the linear part so the integrand is continuous at zero.
    c = levy_density_prefactor(params)
    rho = a / 2.0
    M = params.trunc_level

    def integrand(y):
        return (math.expm1(-lam * y) + lam * y) * y ** (-1.0 - rho)

    tail, _ = integrate.quad(integrand, 0.0, M, epsabs=1e-14, epsrel=1e-12,
                             limit=200)
    linear = -lam * M ** (1.0 - rho) / (1.0 - rho)
    return math.exp(s * c * (tail + linear))


def neg_moment_bound(params: ModelParams, s: float, q: float) -> float:
    """Explicit upper bound for E[(R_s)^(-q)]:
    (1/(q Gamma(q))) e^{K s} (1 + (2q/a)(a/(2s))^{2q/a} Gamma(2q/a))."""
    if q <= 0.0 or s <= 0.0:
        raise ValueError("q and s must be > 0")
    a = params.alpha
    K = (2.0 - a) / a
    return (1.0 / (q * math.gamma(q))) * math.exp(K * s) * (
        1.0 + (2.0 * q / a) * (a / (2.0 * s)) ** (2.0 * q / a)
        * math.gamma(2.0 * q / a))


def heat_kernel(r: float, x, y) -> float:
    """Transition density of generator-Laplacian Brownian motion over time r:
    (4 pi r)^(-d/2) exp(-|x-y|^2 / 4r)."""
    if r <= 0.0:
        raise ValueError("r must be > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = x.size
    dist2 = float(((x - y) ** 2).sum())
    return (4.0 * math.pi * r) ** (-d / 2.0) * math.exp(-dist2 / (4.0 * r))


@dataclass
class SubordinatedBMSample:
    positions: np.ndarray          # (len(times), dim)
    path: SubordinatorPath         # truncated part
    large_jump_times: np.ndarray   # arrivals of the above-truncation jumps
    large_jump_sizes: np.ndarray
    subordinator_values: np.ndarray  # R at the requested times


def sample_subordinated_bm(params: ModelParams, times, dim: int,
                           truncated: bool, stream: Stream,
                           resolution_delta: Optional[float] = None,
                           x0=None) -> SubordinatedBMSample:
    """W(R_t) at the requested times; W is Brownian (variance 2s), R the
    truncated subordinator, plus independent large jumps when truncated is
    off.  The Brownian increments over the truncated clock are drawn
    first, so the truncated path of a coupled full sample is bit-identical
    to the truncated sample with the same stream.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (np.diff(times) < 0).any():
        raise ValueError("times must be nondecreasing")
    if times.size and times[0] < 0:
        raise ValueError("times must be >= 0")
    horizon = float(times[-1]) if times.size else 0.0
    path = sample_truncated_subordinator(params, horizon, resolution_delta,
                                         stream)
    r_trunc = path.values_at(times)
    if x0 is None:
        x0 = np.zeros(dim)
    # Brownian increments over the truncated clock are drawn first, so a
    # truncated sample from the same stream shares them bit for bit; the
    # large-jump clock, sizes and displacements come after (full case).
    pos = np.empty((times.size, dim))
    cur = np.asarray(x0, dtype=float).copy()
    prev = 0.0
    for i in range(times.size):
        d_trunc = r_trunc[i] - prev
        if d_trunc > 0:
            cur = cur + math.sqrt(2.0 * d_trunc) * np.array(_normals(stream, dim))
        prev = r_trunc[i]
        pos[i] = cur
    if truncated:
        return SubordinatedBMSample(pos, path, np.empty(0), np.empty(0),
                                    r_trunc)
    lj_t = np.array(large_jump_arrivals(params, horizon, stream))
    lj_s = np.array([large_jump_size(params, stream) for _ in lj_t])
    csum = np.concatenate([[0.0], np.cumsum(lj_s)])
    r = r_trunc + csum[np.searchsorted(lj_t, times, side="right")]
    extra = np.zeros(dim)
    prev_j = 0.0
    for i in range(times.size):
        d_large = (r[i] - r_trunc[i]) - prev_j
        if d_large > 0:
            extra = extra + math.sqrt(2.0 * d_large) * np.array(
                _normals(stream, dim))
        prev_j = r[i] - r_trunc[i]
        pos[i] = pos[i] + extra
    return SubordinatedBMSample(pos, path, lj_t, lj_s, r)
