import math

import numpy as np
import pytest
from scipy import integrate, stats

from stablevote import levy
from stablevote.params import DomainError, ModelParams, ScalingPreset
from stablevote.rng import Stream, derive_key

P15 = ModelParams(1.5, 0.1, ScalingPreset.log_example())
P18 = ModelParams(1.8, 0.2, ScalingPreset.power_example(1.8))
P20 = ModelParams(2.0, 0.3, ScalingPreset.log_example())


def test_stable_increment_sign_symmetry():
    st = Stream(derive_key(101))
    n = 100_000
    signs = np.sign([levy.sample_stable_increment(P15, 0.2, 1, st)[0]
                     for _ in range(n)])
    assert abs(signs.mean()) <= 3.0 / math.sqrt(n)


def test_stable_increment_self_similarity():
    st1 = Stream(derive_key(102, 1))
    st2 = Stream(derive_key(102, 2))
    n = 20_000
    dt = 0.1
    a = np.array([levy.sample_stable_increment(P15, dt, 1, st1)[0]
                  for _ in range(n)])
    b = np.array([levy.sample_stable_increment(P15, 2 * dt, 1, st2)[0]
                  for _ in range(n)])
    scaled = a * 2.0 ** (1.0 / P15.alpha)
    assert stats.ks_2samp(scaled, b).pvalue > 0.01


def test_brownian_increment_variance():
    st = Stream(derive_key(103))
    n = 100_000
    dt = 0.17
    xs = np.array([levy.sample_stable_increment(P20, dt, 1, st)[0]
                   for _ in range(n)])
    target = 2.0 * P20.speed * dt
    se = np.sqrt(2.0 / n) * target
    assert abs(xs.var() - target) <= 3 * se


def test_stable_matches_reference_law():
    st = Stream(derive_key(104))
    n = 15_000
    dt = 0.3
    xs = np.array([levy.sample_stable_increment(P15, dt, 1, st)[0]
                   for _ in range(n)])
    scale = (P15.speed * dt) ** (1.0 / P15.alpha)
    res = stats.kstest(xs / scale, lambda z: stats.levy_stable.cdf(z, 1.5, 0))
    assert res.pvalue > 0.01


def test_one_sided_stable_laplace():
    st = Stream(derive_key(105))
    rho = 0.9
    xs = np.array([levy.one_sided_stable(rho, st) for _ in range(60_000)])
    for lam in (0.5, 1.5):
        w = np.exp(-lam * xs)
        z = (w.mean() - math.exp(-lam ** rho)) / (w.std() / math.sqrt(len(xs)))
        assert abs(z) <= 3.5


def test_mean_rate_identity_exact():
    for alpha in (1.2, 1.5, 1.8, 1.95):
        p = ModelParams(alpha, 0.15, ScalingPreset.log_example())
        c = levy.levy_density_prefactor(p)
        rho = alpha / 2.0
        val = c * p.trunc_level ** (1.0 - rho) / (1.0 - rho)
        assert val == pytest.approx(1.0, abs=1e-12)


def test_subordinator_path_invariants():
    path = levy.sample_truncated_subordinator(P15, 0.5, stream=Stream(7))
    assert path.value_at(0.0) == 0.0
    assert path.drift_rate >= 0.0
    assert (path.jump_sizes <= P15.trunc_level + 1e-15).all()
    assert (path.jump_sizes >= path.resolution_delta).all()
    ts = np.linspace(0, 0.5, 101)
    vals = path.values_at(ts)
    assert (np.diff(vals) >= 0).all()
    assert vals[-1] == pytest.approx(path.value_at(0.5), rel=1e-12)


def test_subordinator_mean_identity():
    s = 0.07
    vals = levy.bulk_truncated_increments(P18, s, 60_000, seed=3)
    se = vals.std() / math.sqrt(len(vals))
    assert abs(vals.mean() - s) <= 3 * se


def test_path_sampler_matches_bulk_mean():
    s = 0.04
    st = Stream(derive_key(106))
    # coarse resolution keeps the path sampler fast; the mean is exact
    # for any cutoff by drift compensation
    delta = P15.trunc_level * 1e-2
    vals = np.array([
        levy.sample_truncated_subordinator(P15, s, delta, st).value_at(s)
        for _ in range(20_000)])
    se = vals.std() / math.sqrt(len(vals))
    assert abs(vals.mean() - s) <= 3 * se


def test_resolution_delta_validation():
    with pytest.raises(DomainError):
        levy.sample_truncated_subordinator(P15, 1.0, P15.trunc_level * 2,
                                           Stream(1))


def test_large_jump_arrivals():
    st = Stream(derive_key(107))
    T = 1.5
    rate = P15.large_jump_rate()
    n = 20_000
    counts = np.array([len(levy.large_jump_arrivals(P15, T, st))
                       for _ in range(n)])
    se = counts.std() / math.sqrt(n)
    assert abs(counts.mean() - T * rate) <= 3 * se
    # void probability of the Poisson process
    svoid = 0.02
    none = np.array([len(levy.large_jump_arrivals(P15, svoid, st)) == 0
                     for _ in range(n)])
    target = math.exp(-svoid * rate)
    assert abs(none.mean() - target) <= 3 * math.sqrt(target * (1 - target) / n)
    assert levy.large_jump_arrivals(P15, 0.0, st) == []


def test_large_jump_sizes_above_truncation():
    st = Stream(derive_key(108))
    sizes = np.array([levy.large_jump_size(P15, st) for _ in range(5000)])
    assert (sizes >= P15.trunc_level).all()
    # Pareto tail with index alpha/2
    u = (sizes / P15.trunc_level) ** (-P15.alpha / 2.0)
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_laplace_normalization_and_mean():
    assert levy.laplace_transform(P15, 0.4, 0.0) == 1.0
    s = 0.4
    h = 1e-5
    d = -(levy.laplace_transform(P15, s, h)
          - levy.laplace_transform(P15, s, -h)) / (2 * h)
    assert d == pytest.approx(s, abs=1e-6)


def test_laplace_negative_argument_quadrature():
    # exponent integral evaluated two ways
    s, lam = 0.3, -1.7
    c = levy.levy_density_prefactor(P15)
    rho = P15.alpha / 2.0

    def integrand(y):
        return (math.exp(-lam * y) - 1.0) * y ** (-1.0 - rho)

    val, _ = integrate.quad(integrand, 1e-12, P15.trunc_level,
                            epsabs=1e-13, epsrel=1e-11, limit=400)
    assert levy.laplace_transform(P15, s, lam) == pytest.approx(
        math.exp(s * c * val), rel=1e-9)


def test_laplace_matches_monte_carlo():
    s = 0.1
    vals = levy.bulk_truncated_increments(P15, s, 60_000, seed=4)
    for lam in (0.5, 1.0, 5.0):
        w = np.exp(-lam * vals)
        phi = levy.laplace_transform(P15, s, lam)
        z = (w.mean() - phi) / (w.std() / math.sqrt(len(vals)))
        assert abs(z) <= 3.0


def test_neg_moment_bound_properties():
    b = levy.neg_moment_bound(P15, 0.1, 1.0)
    assert b > 0.0 and math.isfinite(b)
    # small-s scaling is governed by s^(-2q/alpha)
    q = 1.0
    expo = 2 * q / P15.alpha
    ratio = levy.neg_moment_bound(P15, 1e-4, q) / levy.neg_moment_bound(
        P15, 2e-4, q)
    assert ratio == pytest.approx(2.0 ** expo, rel=0.05)


def test_neg_moment_bound_dominates_monte_carlo():
    s = 0.1
    vals = levy.bulk_truncated_increments(P15, s, 60_000, seed=5)
    for q in (0.5, 1.5):
        w = vals ** -q
        bound = levy.neg_moment_bound(P15, s, q)
        assert w.mean() <= bound + 3 * w.std() / math.sqrt(len(vals))


def test_heat_kernel_values():
    r = 0.37
    assert levy.heat_kernel(r, [0.0], [0.0]) == pytest.approx(
        (4 * math.pi * r) ** -0.5, rel=1e-14)
    total, _ = integrate.quad(lambda y: levy.heat_kernel(r, [0.2], [y]),
                              -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_heat_kernel_lipschitz():
    rng = np.random.Generator(np.random.Philox(key=derive_key(777)))
    for d in (1, 2):
        C = (4 * math.pi) ** (-d / 2.0)
        for _ in range(2000):
            r = float(rng.uniform(0.05, 2.0))
            x, y = rng.normal(size=d), rng.normal(size=d)
            z = rng.normal(size=d) * 0.3
            lhs = abs(levy.heat_kernel(r, x, y) - levy.heat_kernel(r, x, y + z))
            assert lhs <= C * r ** (-(d + 1) / 2) * np.linalg.norm(z) * (1 + 1e-12)


def test_subordinated_bm_symmetry_and_variance():
    st = Stream(derive_key(109))
    t = 0.3
    n = 50_000
    xs = np.array([levy.sample_subordinated_bm(P15, [t], 1, True, st)
                   .positions[-1][0] for _ in range(n)])
    assert abs(np.sign(xs).mean()) <= 3.0 / math.sqrt(n)
    target = 2.0 * t
    se = math.sqrt(np.var(xs ** 2) / n)
    assert abs(xs.var() - target) <= 3 * se


def test_subordinated_full_is_stable():
    st1 = Stream(derive_key(110))
    st2 = Stream(derive_key(111))
    t = 0.25
    n = 15_000
    ws = np.array([levy.sample_subordinated_bm(P15, [t], 1, False, st1)
                   .positions[-1][0] for _ in range(n)])
    xs = np.array([levy.sample_stable_increment(P15, t, 1, st2)[0]
                   for _ in range(n)])
    assert stats.ks_2samp(ws, xs).pvalue > 0.01


def test_full_truncated_coupling_shares_prefix():
    # same stream key: the truncated positions agree bit for bit, and the
    # full path deviates exactly when a large jump fired
    key = derive_key(112)
    t = 0.25
    agree = deviate = 0
    for rep in range(300):
        full = levy.sample_subordinated_bm(P15, [t], 1, False,
                                           Stream(key + rep))
        trunc = levy.sample_subordinated_bm(P15, [t], 1, True,
                                            Stream(key + rep))
        if len(full.large_jump_times) == 0:
            agree += 1
            assert full.positions[-1][0] == trunc.positions[-1][0]
        else:
            deviate += 1
            assert full.positions[-1][0] != trunc.positions[-1][0]
    assert agree > 0 and deviate > 0
