"""Monte Carlo estimation of root-vote probabilities.

Replicates are seeded by (master seed, replicate index), so estimates are
bit-identical for a fixed master seed no matter how replicates are split
across workers; the reduction is an integer vote count.  Coupled pairs
evaluate two (motion, scheme) configurations on shared channels per
replicate and report the paired difference, which removes the common
variance.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import ZShiftOrigin
from .params import ModelParams, ScalingPreset
from .tree import (NODE_BUDGET_DEFAULT, BudgetExceeded, MotionSpec,
                   UncouplablePair, lazy_evaluate)
from .voting import VoteScheme

_Z95 = 1.959963984540054

# A replicate whose band shift hits the origin (measure-zero event) is
# retried with a fresh key; the count is reported on the estimate.
_MAX_RESAMPLE = 8
_BUDGET_FAIL_FRACTION = 1e-3
FEASIBLE_LOG_POPULATION = 8.0  # warn above t/eps^2 = 8


def F_eps(params: ModelParams) -> float:
    """Interface-sharpness functional I^2 eps^(-2/alpha) |log eps| + I^(alpha-1)."""
    if params.is_brownian:
        raise ValueError("F is defined for alpha < 2")
    e, I, a = params.epsilon, params.I_val, params.alpha
    return I * I * e ** (-2.0 / a) * abs(math.log(e)) + I ** (a - 1.0)


@dataclass(frozen=True)
class AssumptionRow:
    expression: str
    values: tuple
    decreasing_tail: bool


def assumption_report(preset: ScalingPreset, alpha: float,
                      eps_grid: Sequence[float]) -> list[AssumptionRow]:
    """Evaluate the three scaling conditions on a grid and report whether
    each expression decreases toward zero over the grid tail."""
    eps_grid = sorted(eps_grid, reverse=True)  # decreasing eps
    if not eps_grid:
        raise ValueError("eps grid must be nonempty")
    rows = []

    def add(name, fn):
        vals = tuple(fn(e) for e in eps_grid)
        tail = vals[len(vals) // 2:]
        decreasing = all(b < a for a, b in zip(tail, tail[1:]))
        rows.append(AssumptionRow(name, vals, decreasing))

    for k in (1, 2, 3):
        add(f"I(eps)|log eps|^{k}",
            lambda e, k=k: preset.I(e) * abs(math.log(e)) ** k)
    add("eps^2 I^-2 |log eps|",
        lambda e: e * e / preset.I(e) ** 2 * abs(math.log(e)))
    add("I^2a eps^-2 |log eps|^a",
        lambda e: preset.I(e) ** (2 * alpha) / (e * e) * abs(math.log(e)) ** alpha)
    return rows


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be > 0")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    n: int
    stderr: float
    ci95: tuple
    seed: int
    budget_exhausted_count: int = 0
    resampled_count: int = 0

    @classmethod
    def from_votes(cls, successes: int, n: int, seed: int,
                   budget_exhausted: int = 0, resampled: int = 0) -> "Estimate":
        p = successes / n
        return cls(p, n, math.sqrt(p * (1.0 - p) / n),
                   wilson_interval(successes, n), seed,
                   budget_exhausted, resampled)


def _replicate_vote(params, t, spec, scheme, x, master_seed, rep,
                    node_budget, mirror=False):
    """One root vote; retries on the measure-zero shift singularity."""
    for attempt in range(_MAX_RESAMPLE):
        try:
            res = lazy_evaluate(
                params, t, spec, scheme, master_seed,
                replicate=rep if attempt == 0 else rep + ((attempt + 1) << 48),
                root_position=x, node_budget=node_budget, mirror=mirror)
            return res.root_vote, attempt
        except ZShiftOrigin:
            continue
    raise ZShiftOrigin(f"replicate {rep} hit the origin {_MAX_RESAMPLE} times")


def _chunk_votes(args):
    (params, t, spec, scheme, x, master_seed, lo, hi, node_budget,
     mirror) = args
    ones = budget = resampled = 0
    for rep in range(lo, hi):
        try:
            v, attempts = _replicate_vote(params, t, spec, scheme, x,
                                          master_seed, rep, node_budget, mirror)
            ones += v
            resampled += attempts
        except BudgetExceeded:
            budget += 1
    return ones, budget, resampled


def validate_horizon(params: ModelParams, t: float) -> None:
    if t < 0:
        raise ValueError("t must be >= 0")
    if t / params.epsilon ** 2 > FEASIBLE_LOG_POPULATION:
        import warnings

        warnings.warn(
            f"t/eps^2 = {t / params.epsilon ** 2:.2f} > "
            f"{FEASIBLE_LOG_POPULATION}: expected population "
            "exp(2t/eps^2) may exhaust the node budget", RuntimeWarning)


def estimate_u(params: ModelParams, x, t: float, motion: MotionSpec,
               scheme: VoteScheme, n: int, master_seed: int,
               workers: int = 1, node_budget: int = NODE_BUDGET_DEFAULT,
               mirror: bool = False) -> Estimate:
    """Fraction of n independent lazy-evaluated root votes equal to one."""
    if n < 1:
        raise ValueError("n must be >= 1")
    validate_horizon(params, t)
    if workers <= 1:
        ones, budget, resampled = _chunk_votes(
            (params, t, motion, scheme, x, master_seed, 0, n, node_budget,
             mirror))
    else:
        bounds = np.linspace(0, n, workers * 4 + 1).astype(int)
        jobs = [(params, t, motion, scheme, x, master_seed, int(lo), int(hi),
                 node_budget, mirror)
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_votes, jobs))
        ones = sum(p[0] for p in parts)
        budget = sum(p[1] for p in parts)
        resampled = sum(p[2] for p in parts)
    if budget > _BUDGET_FAIL_FRACTION * n:
        raise BudgetExceeded(budget)
    effective = n - budget
    return Estimate.from_votes(ones, effective, master_seed, budget, resampled)


@dataclass(frozen=True)
class CoupledEstimate:
    first: Estimate
    second: Estimate
    diff: float              # mean of (first - second) per replicate
    diff_stderr: float       # paired standard error
    mean_ab: float           # mean of the vote product per replicate
    n: int

    def diff_ci95(self) -> tuple:
        return (self.diff - _Z95 * self.diff_stderr,
                self.diff + _Z95 * self.diff_stderr)

    def combo_stats(self, ca: float, cb: float) -> tuple:
        """Mean and SE of ca*A + cb*B per replicate (for identities that
        mix the two coupled sides with constants)."""
        pa, pb = self.first.p_hat, self.second.p_hat
        mean = ca * pa + cb * pb
        cov = self.mean_ab - pa * pb
        var = (ca * ca * pa * (1 - pa) + cb * cb * pb * (1 - pb)
               + 2 * ca * cb * cov)
        return mean, math.sqrt(max(var, 0.0) / self.n)


def _validate_couplable(a: MotionSpec, b: MotionSpec) -> None:
    if a.family() != b.family():
        raise UncouplablePair(
            f"{a.kind.value} and {b.kind.value} do not share a randomness "
            "layout; couple within the stable family or the subordinated "
            "family")


def _chunk_paired(args):
    (params, t, spec_a, scheme_a, spec_b, scheme_b, x, master_seed, lo, hi,
     node_budget) = args
    ones_a = ones_b = ones_ab = budget = resampled = 0
    sum_d = 0.0
    sum_d2 = 0.0
    for rep in range(lo, hi):
        try:
            va, ra = _replicate_vote(params, t, spec_a, scheme_a, x,
                                     master_seed, rep, node_budget)
            vb, rb = _replicate_vote(params, t, spec_b, scheme_b, x,
                                     master_seed, rep, node_budget)
            d = va - vb
            ones_a += va
            ones_b += vb
            ones_ab += va * vb
            sum_d += d
            sum_d2 += d * d
            resampled += ra + rb
        except BudgetExceeded:
            budget += 1
    return ones_a, ones_b, ones_ab, sum_d, sum_d2, budget, resampled


def estimate_coupled(params: ModelParams, x, t: float,
                     pair_a: tuple, pair_b: tuple, n: int, master_seed: int,
                     workers: int = 1,
                     node_budget: int = NODE_BUDGET_DEFAULT) -> CoupledEstimate:
    """Paired estimates for two (motion, scheme) configurations sharing
    per-replicate randomness; reports the difference with paired SE."""
    spec_a, scheme_a = pair_a
    spec_b, scheme_b = pair_b
    _validate_couplable(spec_a, spec_b)
    validate_horizon(params, t)
    if workers <= 1:
        parts = [_chunk_paired((params, t, spec_a, scheme_a, spec_b, scheme_b,
                                x, master_seed, 0, n, node_budget))]
    else:
        bounds = np.linspace(0, n, workers * 4 + 1).astype(int)
        jobs = [(params, t, spec_a, scheme_a, spec_b, scheme_b, x,
                 master_seed, int(lo), int(hi), node_budget)
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_paired, jobs))
    ones_a = sum(p[0] for p in parts)
    ones_b = sum(p[1] for p in parts)
    ones_ab = sum(p[2] for p in parts)
    sum_d = sum(p[3] for p in parts)
    sum_d2 = sum(p[4] for p in parts)
    budget = sum(p[5] for p in parts)
    resampled = sum(p[6] for p in parts)
    if budget > _BUDGET_FAIL_FRACTION * n:
        raise BudgetExceeded(budget)
    m = n - budget
    mean_d = sum_d / m
    var_d = max(sum_d2 / m - mean_d * mean_d, 0.0)
    est_a = Estimate.from_votes(ones_a, m, master_seed, budget, resampled)
    est_b = Estimate.from_votes(ones_b, m, master_seed, budget, resampled)
    return CoupledEstimate(est_a, est_b, mean_d,
                           math.sqrt(var_d / m), ones_ab / m, m)


def isotonic_residual(values: Sequence[float]) -> float:
    """Max |value - increasing fit| via pool-adjacent-violators."""
    vals = list(values)
    blocks = [[v, 1] for v in vals]
    i = 0
    while i < len(blocks) - 1:
        if blocks[i][0] > blocks[i + 1][0] + 1e-15:
            s = blocks[i][0] * blocks[i][1] + blocks[i + 1][0] * blocks[i + 1][1]
            w = blocks[i][1] + blocks[i + 1][1]
            blocks[i] = [s / w, w]
            del blocks[i + 1]
            if i:
                i -= 1
        else:
            i += 1
    fit = []
    for v, w in blocks:
        fit.extend([v] * w)
    return max(abs(a - b) for a, b in zip(vals, fit))


@dataclass
class InterfaceScan:
    x_grid: np.ndarray
    estimates: list
    crossing: Optional[float]
    monotone_residual: float


def interface_scan(params: ModelParams, t: float, x_grid: Sequence[float],
                   motion: MotionSpec, scheme: VoteScheme, n: int,
                   master_seed: int, workers: int = 1,
                   antithetic: bool = False,
                   axis: Optional[Sequence[float]] = None) -> InterfaceScan:
    """Profile of estimates along a grid of offsets, the level-1/2
    crossing by linear interpolation, and the isotonic-regression
    residual.  In dimension one the offsets are the positions; in higher
    dimensions they multiply the unit vector `axis`.

    antithetic evaluates negative grid points as exact mirrors of their
    positive partners (shared seeds, remapped votes), which enforces
    profile(-x) = 1 - profile(x) replicate by replicate.
    """
    x_grid = np.asarray(sorted(x_grid), dtype=float)
    if motion.dim > 1:
        if axis is None:
            axis = (1.0,) + (0.0,) * (motion.dim - 1)
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)

    def position(xv: float):
        if motion.dim == 1:
            return xv
        return tuple(xv * axis)

    ests: dict[int, Estimate] = {}
    for i, xv in enumerate(x_grid):
        # Antithetic mode pairs -x with +x on one seed: the mirror run
        # negates every increment and complements every vote uniform, so
        # its root vote is exactly one minus the partner's.
        if antithetic:
            seed_i = master_seed + 7919 * round(abs(xv) * 1e9)
        else:
            seed_i = master_seed + 7919 * i
        mirror = antithetic and xv < 0.0
        ests[i] = estimate_u(params, position(xv), t, motion, scheme, n,
                             seed_i, workers=workers, mirror=mirror)
    estimates = [ests[i] for i in range(len(x_grid))]
    phats = [e.p_hat for e in estimates]
    crossing = None
    for a, b, xa, xb in zip(phats[:-1], phats[1:], x_grid[:-1], x_grid[1:]):
        if (a - 0.5) * (b - 0.5) <= 0.0 and a != b:
            crossing = float(xa + (0.5 - a) / (b - a) * (xb - xa))
            break
    return InterfaceScan(x_grid, estimates, crossing, isotonic_residual(phats))
