import math

import numpy as np
import pytest

from stablevote import geometry, oracle
from stablevote.params import ModelParams, ScalingPreset

P = ModelParams(1.5, 0.1, ScalingPreset.log_example())
FLOW = geometry.SphereFlow(1.0, 2)


def test_sphere_flow_exactness():
    for dim in (2, 3):
        flow = geometry.SphereFlow(1.3, dim)
        for t in np.linspace(0.0, flow.extinction_time * 0.99, 20):
            r = flow.radius(t)
            assert r * r + 2 * (dim - 1) * t == pytest.approx(1.3 ** 2,
                                                              abs=1e-14)


def test_flow_extinction():
    assert FLOW.extinction_time == pytest.approx(0.5)
    with pytest.raises(geometry.FlowExtinct):
        FLOW.radius(0.5)


def test_signed_distance_values():
    t = 0.25
    r = FLOW.radius(t)
    assert r == pytest.approx(math.sqrt(0.5), abs=1e-15)
    on_sphere = (r, 0.0)
    assert geometry.signed_distance(on_sphere, t, FLOW) == pytest.approx(
        0.0, abs=1e-15)
    assert geometry.signed_distance((1.0, 0.0), t, FLOW) == pytest.approx(
        1.0 - math.sqrt(0.5), abs=1e-14)
    assert geometry.signed_distance((0.0, 0.0), t, FLOW) == pytest.approx(
        -r, abs=1e-15)


def test_unit_gradient_along_radius():
    t = 0.1
    base = (0.8, 0.3)
    norm = math.hypot(*base)
    unit = (base[0] / norm, base[1] / norm)
    for h in (0.05, 0.117, 0.42):
        moved = (base[0] + h * unit[0], base[1] + h * unit[1])
        d1 = geometry.signed_distance(moved, t, FLOW)
        d0 = geometry.signed_distance(base, t, FLOW)
        assert d1 - d0 == pytest.approx(h, abs=1e-14)


def test_z_shift_identity_and_pairing():
    t_rem = 0.2
    r = FLOW.radius(t_rem)
    pos = (r * 0.6, r * 0.8)  # on the sphere
    amt = geometry.shift_amount(P, 2.0)
    zp = geometry.z_shift(pos, t_rem, FLOW, P, 2.0, 0.3, +1)
    zm = geometry.z_shift(pos, t_rem, FLOW, P, 2.0, 0.3, -1)
    assert geometry.signed_distance(zp, t_rem, FLOW) == pytest.approx(
        amt, abs=1e-12)
    assert geometry.signed_distance(zm, t_rem, FLOW) == pytest.approx(
        -amt, abs=1e-12)
    gap = math.hypot(zp[0] - zm[0], zp[1] - zm[1])
    assert gap == pytest.approx(2 * amt, abs=1e-12)


def test_z_shift_outside_band_identity():
    pos = (3.0, 0.0)
    assert geometry.z_shift(pos, 0.1, FLOW, P, 2.0, 0.3, +1) == pos


def test_z_shift_origin_errors():
    with pytest.raises(geometry.ZShiftOrigin):
        geometry.z_shift((0.0, 0.0), 0.45, FLOW, P, 2.0, 0.9, +1)
    # inward shift crossing the origin is rejected too
    big_flow = geometry.SphereFlow(0.2, 2)
    p_big = ModelParams(1.5, 0.3, ScalingPreset.log_example())
    with pytest.raises(geometry.ZShiftOrigin):
        geometry.z_shift((0.05, 0.0), 0.0, big_flow, p_big, 20.0, 0.3, -1)


def test_coupling_check_fitted_rates():
    k = 1
    t = 0.25
    s_max = (k + 1) * P.epsilon ** 2 * abs(math.log(P.epsilon))
    s_grid = np.linspace(s_max / 10, s_max, 10)
    x0 = (FLOW.radius(t) + 0.01, 0.0)
    C0, D0 = geometry.fit_coupling_constants(P, FLOW, x0, t, s_grid, 1500,
                                             seed=41, k=k)
    rep = geometry.coupling_check(P, FLOW, x0, t, s_grid, 1500, seed=42,
                                  C0=C0, D0=D0, k=k)
    lim = rep.target + 3 * rep.stderr(rep.target)
    assert rep.violation_rate_plus <= lim
    assert rep.violation_rate_minus <= lim
    assert rep.subordinator_deviation_rate <= lim


def test_coupling_check_validates_band():
    with pytest.raises(ValueError):
        geometry.coupling_check(P, FLOW, (5.0, 0.0), 0.25, [0.01], 10,
                                seed=1, C0=1.0, D0=1.0)


def test_level_set_radius_indicator():
    field = oracle.radial_step_2d(3.0, 256, 1.0)
    r = geometry.level_set_radius(field)
    h = 2 * 3.0 / 256
    assert abs(r - 1.0) <= h


def test_level_set_radius_no_crossing():
    field = oracle.radial_step_2d(3.0, 64, 1.0)
    field.values[:] = 0.9
    with pytest.raises(ValueError):
        geometry.level_set_radius(field)


def test_gronwall_gap_degenerate_cases():
    p = ModelParams(1.8, 0.3, ScalingPreset.power(0.97, 1.8))
    flow = geometry.SphereFlow(1.0, 2)
    zero = geometry.gronwall_gap(p, flow, (1.0, 0.0), 2 * p.epsilon ** 2,
                                 500, 43, l=0.0, beta=0.3)
    assert zero.diff == 0.0
    far = geometry.gronwall_gap(p, flow, (9.0, 0.0), 2 * p.epsilon ** 2,
                                500, 44, l=2.0, beta=0.3)
    assert far.diff == 0.0
