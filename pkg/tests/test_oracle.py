import math

import numpy as np
import pytest

from stablevote import oracle, voting
from stablevote.params import ModelParams, ScalingPreset
from stablevote.tree import MotionKind, MotionSpec

P = ModelParams(1.5, 0.3, ScalingPreset.log_example())
P2 = ModelParams(2.0, 0.3, ScalingPreset.log_example())


def test_multiplier_zero_mode():
    k = oracle.wavenumbers(10.0, 128)
    m = oracle.fractional_multiplier(P, k)
    assert m[0] == 0.0
    assert (m[1:] < 0).all()


def test_multiplier_alpha_continuity():
    p199 = ModelParams(1.999, 0.3, ScalingPreset.log_example())
    k = np.array([1.0])
    m199 = oracle.fractional_multiplier(p199, k)[0]
    m2 = oracle.fractional_multiplier(P2, k)[0]
    assert abs(m199 - m2) / abs(m2) < 0.02


def test_grid_field_validation():
    with pytest.raises(ValueError):
        oracle.GridField(1, 10.0, 100, np.zeros(100))  # not a power of two
    with pytest.raises(ValueError):
        oracle.GridField(2, 10.0, 64, np.zeros(64))


def test_single_mode_linear_decay():
    L, N = math.pi, 256
    x = oracle.GridField(1, L, N, np.zeros(N)).axis()
    kmode = 3.0
    init = oracle.GridField(1, L, N, 0.5 + 0.4 * np.cos(kmode * x))
    T = 0.05
    res = oracle.solve(P, init, T, 0.005, reaction_on=False, clip=False)
    out = res.snapshots[-1].values
    amp = (out.max() - out.min()) / 2.0
    target = 0.4 * math.exp(-P.speed * kmode ** P.alpha * T)
    assert amp == pytest.approx(target, abs=1e-6)
    assert out.mean() == pytest.approx(0.5, abs=1e-10)


def test_field_invariants_on_step_run():
    res = oracle.solve(P, oracle.smoothed_step_1d(16.0, 512),
                       P.epsilon ** 2, 0.05 * P.epsilon ** 2)
    assert res.max_overshoot <= oracle.OVERSHOOT_TOL
    assert res.max_imag_mass <= 1e-10


def test_stationary_states():
    for c in (0.0, 0.5, 1.0):
        init = oracle.GridField(1, 8.0, 128, np.full(128, c))
        res = oracle.solve(P, init, 0.2, 0.1 * P.epsilon ** 2)
        assert np.abs(res.snapshots[-1].values - c).max() <= 1e-10


def test_middle_state_unstable():
    L, N = 8.0, 256
    x = oracle.GridField(1, L, N, np.zeros(N)).axis()
    init = oracle.GridField(1, L, N, 0.5 + 0.01 * np.cos(2 * math.pi * x / L))
    res = oracle.solve(P, init, 0.3 * P.epsilon ** 2, 0.05 * P.epsilon ** 2,
                       clip=False)
    amp0 = 0.01
    amp1 = (res.snapshots[-1].values.max()
            - res.snapshots[-1].values.min()) / 2.0
    assert amp1 > amp0


def test_cfl_validation():
    init = oracle.smoothed_step_1d(8.0, 128)
    with pytest.raises(oracle.CFLViolation):
        oracle.solve(P, init, 0.1, P.epsilon ** 2)


def test_self_convergence_alpha2():
    # double spatial resolution changes the solution below 1e-4
    T = P2.epsilon ** 2
    dt = 0.05 * P2.epsilon ** 2
    coarse = oracle.solve(P2, oracle.smoothed_step_1d(16.0, 512, cells=2.0),
                          T, dt).snapshots[-1]
    fine = oracle.solve(P2, oracle.smoothed_step_1d(16.0, 1024, cells=4.0),
                        T, dt).snapshots[-1]
    # same physical smoothing width (cells scale with h)
    err = np.abs(coarse.values - fine.values[::2]).max()
    assert err <= 1e-4


def test_grid_self_convergence_smooth_data():
    L, N = 8.0, 128
    x = oracle.GridField(1, L, N, np.zeros(N)).axis()
    smooth = 0.5 + 0.3 * np.sin(2 * math.pi * x / L)
    T = 0.5 * P.epsilon ** 2
    dt = 0.02 * P.epsilon ** 2

    def run(n):
        xx = oracle.GridField(1, L, n, np.zeros(n)).axis()
        init = oracle.GridField(1, L, n,
                                0.5 + 0.3 * np.sin(2 * math.pi * xx / L))
        return oracle.solve(P, init, T, dt).snapshots[-1].values

    coarse = run(128)
    mid = run(256)
    fine = run(512)
    e1 = np.abs(coarse - mid[::2]).max()
    e2 = np.abs(mid - fine[::2]).max()
    assert e1 <= 1e-6 or e1 >= 2 * e2


def test_comparison_principle():
    rng = np.random.Generator(np.random.Philox(key=99))
    L, N = 8.0, 256
    x = oracle.GridField(1, L, N, np.zeros(N)).axis()
    base = 0.5 + 0.4 * np.sin(2 * math.pi * x / L) * np.exp(
        -np.cos(2 * math.pi * x / L))
    base = np.clip(base, 0.0, 1.0)
    bump = 0.1 * np.exp(-(x ** 2))
    lo = oracle.GridField(1, L, N, np.clip(base - bump, 0, 1))
    hi = oracle.GridField(1, L, N, np.clip(base + bump, 0, 1))
    T = P.epsilon ** 2
    dt = 0.05 * P.epsilon ** 2
    ul = oracle.solve(P, lo, T, dt).snapshots[-1].values
    uh = oracle.solve(P, hi, T, dt).snapshots[-1].values
    assert (uh - ul).min() >= -1e-8


def test_mirror_symmetry_of_solutions():
    L, N = 16.0, 512
    init = oracle.smoothed_step_1d(L, N)
    T = P.epsilon ** 2
    res = oracle.solve(P, init, T, 0.05 * P.epsilon ** 2).snapshots[-1]
    u = res.values
    # u(-x) = 1 - u(x) on the mirrored index set
    mirrored = 1.0 - np.roll(u[::-1], 1)
    assert np.abs(u - mirrored).max() <= 1e-8


def test_translation_equivariance():
    L, N = 8.0, 256
    shift = 16
    x = oracle.GridField(1, L, N, np.zeros(N)).axis()
    vals = 0.5 + 0.3 * np.sin(2 * math.pi * x / L)
    a = oracle.GridField(1, L, N, vals.copy())
    b = oracle.GridField(1, L, N, np.roll(vals, shift))
    T = 0.5 * P.epsilon ** 2
    dt = 0.05 * P.epsilon ** 2
    ua = oracle.solve(P, a, T, dt).snapshots[-1].values
    ub = oracle.solve(P, b, T, dt).snapshots[-1].values
    assert np.abs(np.roll(ua, shift) - ub).max() <= 1e-10


def test_snapshot_binary_round_trip():
    f = oracle.radial_step_2d(4.0, 64, 1.0)
    f.time = 0.125
    g = oracle.GridField.from_bytes(f.to_bytes())
    assert g.dim == 2 and g.N == 64 and g.L == 4.0 and g.time == 0.125
    assert np.array_equal(f.values, g.values)


def test_center_cut_shapes():
    f1 = oracle.smoothed_step_1d(4.0, 64)
    assert f1.center_cut().shape == (64,)
    f2 = oracle.radial_step_2d(4.0, 64, 1.0)
    assert f2.center_cut().shape == (64,)


def test_duality_compare_small():
    rows = oracle.duality_compare(
        P, MotionSpec(MotionKind.STABLE_1D), voting.majority_scheme(),
        [(0.0, P.epsilon ** 2), (0.5, P.epsilon ** 2)], n_mc=4000,
        master_seed=31, L=24.0, N=2048)
    assert all(r.passed for r in rows)
    assert rows[0].oracle == pytest.approx(0.5, abs=1e-6)
