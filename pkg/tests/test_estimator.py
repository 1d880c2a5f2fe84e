import math

import pytest

from stablevote import estimator, voting
from stablevote.params import ModelParams, ScalingPreset
from stablevote.tree import BudgetExceeded, MotionKind, MotionSpec, UncouplablePair

P = ModelParams(1.5, 0.3, ScalingPreset.log_example())
P_MARK = ModelParams(1.9, 0.25, ScalingPreset.power(0.53, 1.9))
STABLE = MotionSpec(MotionKind.STABLE_1D)
TRUNC = MotionSpec(MotionKind.SUB_BM_TRUNC)
FULL = MotionSpec(MotionKind.SUB_BM_FULL)


def test_F_eps_frozen_value():
    p = ModelParams(1.5, 0.1, ScalingPreset.log_example())
    # recomputed: I = 0.230259, term1 = 2.630149, term2 = 0.479853
    assert estimator.F_eps(p) == pytest.approx(3.1100018, abs=2e-6)


def test_F_eps_vanishes_along_log_preset():
    vals = [estimator.F_eps(ModelParams(1.5, 10.0 ** -m,
                                        ScalingPreset.log_example()))
            for m in range(2, 9)]
    # decreasing beyond some index and tending to zero
    tail = vals[2:]
    assert all(b < a for a, b in zip(tail, tail[1:]))
    assert vals[-1] < 0.05


def test_assumption_report_log_preset():
    rows = estimator.assumption_report(ScalingPreset.log_example(), 1.5,
                                       [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    assert len(rows) == 5
    assert all(r.decreasing_tail for r in rows)


def test_assumption_report_power_example():
    rows = estimator.assumption_report(ScalingPreset.power_example(1.5), 1.5,
                                       [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    assert all(r.decreasing_tail for r in rows)


def test_assumption_report_flags_identity_scaling():
    # I(eps) = eps (not constructible through the validated factory) fails
    # the second condition: eps^2/I^2 |log eps| = |log eps| grows
    bad = ScalingPreset("power", 1.0)
    rows = estimator.assumption_report(bad, 1.5, [1e-2, 1e-3, 1e-4, 1e-5])
    flagged = {r.expression: r.decreasing_tail for r in rows}
    assert not flagged["eps^2 I^-2 |log eps|"]


def test_wilson_interval_contains_estimate():
    for k, n in ((0, 50), (50, 50), (13, 40), (1, 7)):
        lo, hi = estimator.wilson_interval(k, n)
        assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_estimate_certain_vote():
    scheme = voting.VoteScheme(voting.SchemeKind.MAJORITY,
                               voting.ConstantIC(1.0))
    est = estimator.estimate_u(P, 0.0, P.epsilon ** 2, STABLE, scheme, 500, 1)
    assert est.p_hat == 1.0


def test_estimate_time_zero_step():
    est = estimator.estimate_u(P, 0.7, 0.0, STABLE,
                               voting.majority_scheme(), 300, 2)
    assert est.p_hat == 1.0
    est = estimator.estimate_u(P, -0.7, 0.0, STABLE,
                               voting.majority_scheme(), 300, 2)
    assert est.p_hat == 0.0


def test_estimate_symmetry_at_origin():
    est = estimator.estimate_u(P, 0.0, P.epsilon ** 2, STABLE,
                               voting.majority_scheme(), 20_000, 3)
    assert abs(est.p_hat - 0.5) <= 3 * est.stderr


def test_estimate_worker_determinism():
    args = (P, 0.4, P.epsilon ** 2, STABLE, voting.majority_scheme(), 1200, 4)
    base = estimator.estimate_u(*args, workers=1)
    four = estimator.estimate_u(*args, workers=4)
    assert base == four


def test_estimate_validations():
    with pytest.raises(ValueError):
        estimator.estimate_u(P, 0.0, P.epsilon ** 2, STABLE,
                             voting.majority_scheme(), 0, 1)
    with pytest.raises(BudgetExceeded):
        estimator.estimate_u(P, 0.0, 3 * P.epsilon ** 2, STABLE,
                             voting.majority_scheme(), 200, 1, node_budget=8)
    with pytest.warns(RuntimeWarning):
        estimator.validate_horizon(P, 9 * P.epsilon ** 2)


def test_coupled_identical_pair_zero_diff():
    scheme = voting.marked_scheme(P_MARK)
    ce = estimator.estimate_coupled(P_MARK, 0.2, P_MARK.epsilon ** 2,
                                    (TRUNC, scheme), (TRUNC, scheme), 500, 5)
    assert ce.diff == 0.0 and ce.diff_stderr == 0.0
    assert ce.first.p_hat == ce.second.p_hat


def test_coupled_rejects_mixed_families():
    with pytest.raises(UncouplablePair):
        estimator.estimate_coupled(
            P_MARK, 0.0, P_MARK.epsilon ** 2,
            (STABLE, voting.majority_scheme()),
            (TRUNC, voting.marked_scheme(P_MARK)), 100, 6)


def test_coupled_full_vs_truncated_runs():
    ce = estimator.estimate_coupled(
        P_MARK, 0.3, P_MARK.epsilon ** 2,
        (FULL, voting.majority_scheme()),
        (TRUNC, voting.exp_marked_scheme(P_MARK)), 4000, 7)
    # domination at positive start, one-sided at 3 paired SE
    assert ce.diff >= -3 * ce.diff_stderr


def test_combo_stats_matches_direct_variance():
    scheme_a = voting.marked_scheme(P_MARK, mark_root=True)
    scheme_b = voting.marked_scheme(P_MARK)
    ce = estimator.estimate_coupled(P_MARK, 0.3, P_MARK.epsilon ** 2,
                                    (TRUNC, scheme_a), (TRUNC, scheme_b),
                                    3000, 8)
    mean, se = ce.combo_stats(1.0, -1.0)
    assert mean == pytest.approx(ce.diff, abs=1e-12)
    assert se == pytest.approx(ce.diff_stderr, rel=1e-9)


def test_isotonic_residual():
    assert estimator.isotonic_residual([0.1, 0.2, 0.3]) == 0.0
    assert estimator.isotonic_residual([0.3, 0.1]) == pytest.approx(0.1)


def test_interface_scan_antithetic_exact_mirror():
    scan = estimator.interface_scan(
        P, P.epsilon ** 2, [-0.6, -0.2, 0.2, 0.6], STABLE,
        voting.majority_scheme(), 800, 9, antithetic=True)
    p = {x: e.p_hat for x, e in zip(scan.x_grid, scan.estimates)}
    assert p[-0.6] == pytest.approx(1.0 - p[0.6], abs=1e-12)
    assert p[-0.2] == pytest.approx(1.0 - p[0.2], abs=1e-12)


def test_interface_scan_crossing_and_monotonicity():
    scan = estimator.interface_scan(
        P, P.epsilon ** 2, [-0.8, -0.4, 0.0, 0.4, 0.8], STABLE,
        voting.majority_scheme(), 4000, 10, antithetic=True)
    assert scan.crossing == pytest.approx(0.0, abs=0.15)
    assert scan.monotone_residual <= 0.05


def test_mirrored_independent_seeds_within_noise():
    e_pos = estimator.estimate_u(P, 0.5, P.epsilon ** 2, STABLE,
                                 voting.majority_scheme(), 8000, 11)
    e_neg = estimator.estimate_u(P, -0.5, P.epsilon ** 2, STABLE,
                                 voting.majority_scheme(), 8000, 12)
    se = math.sqrt(e_pos.stderr ** 2 + e_neg.stderr ** 2)
    assert abs(e_pos.p_hat - (1.0 - e_neg.p_hat)) <= 3 * se
