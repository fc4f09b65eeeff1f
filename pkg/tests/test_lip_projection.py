import numpy as np
import pytest

from lipfrag.lip_projection import ProjectionBounds, active_intervals, compute_bounds, \
    is_lipschitz, project_lower, project_upper

from oracles import brute_force_lower, brute_force_upper

ELL = 1.0  # slope c = h_e / ell set directly through h_e below


def test_constant_field_is_lipschitz():
    assert is_lipschitz(np.full(10, 0.4), 0.3, ELL)


def test_big_jump_is_not_lipschitz():
    assert not is_lipschitz(np.array([0.0, 1.0]), 0.3, ELL)


def test_projection_output_is_lipschitz():
    rng = np.random.default_rng(1)
    for _ in range(50):
        d = rng.random(rng.integers(1, 80))
        c = float(rng.uniform(0.05, 0.5))
        assert is_lipschitz(project_lower(d, c, ELL), c, ELL, tol=1e-15)
        assert is_lipschitz(project_upper(d, c, ELL), c, ELL, tol=1e-15)


def test_hand_example_lower():
    out = project_lower(np.array([0.0, 1.0, 0.0]), 0.3, ELL)
    assert np.allclose(out, [0.0, 0.3, 0.0])


def test_hand_example_upper():
    out = project_upper(np.array([0.0, 1.0, 0.0]), 0.3, ELL)
    assert np.allclose(out, [0.7, 1.0, 0.7])


def test_lipschitz_field_is_fixed_point():
    # fixed point up to one rounding: a competing candidate d_j -/+ c|i-j|
    # can round a single ulp past d_i
    rng = np.random.default_rng(2)
    for _ in range(30):
        raw = rng.random(60)
        c = float(rng.uniform(0.05, 0.5))
        d = project_lower(raw, c, ELL)  # Lipschitz by construction
        assert np.abs(project_lower(d, c, ELL) - d).max() <= 3e-16
        assert np.abs(project_upper(d, c, ELL) - d).max() <= 3e-16


def test_sweeps_match_brute_force_exactly():
    # acceptance criterion 2: O(N) sweeps equal the O(N^2) definition exactly
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = int(rng.integers(1, 201))
        d = rng.random(n)
        c = float(rng.uniform(0.01, 0.8))
        assert np.array_equal(project_lower(d, c, ELL), brute_force_lower(d, c))
        assert np.array_equal(project_upper(d, c, ELL), brute_force_upper(d, c))


def test_idempotence():
    rng = np.random.default_rng(3)
    for _ in range(30):
        d = rng.random(100)
        c = 0.2
        lower = project_lower(d, c, ELL)
        upper = project_upper(d, c, ELL)
        assert np.abs(project_lower(lower, c, ELL) - lower).max() <= 3e-16
        assert np.abs(project_upper(upper, c, ELL) - upper).max() <= 3e-16


def test_duality_upper_equals_one_minus_lower_of_complement():
    rng = np.random.default_rng(4)
    for _ in range(30):
        d = rng.random(120)
        c = 0.17
        lhs = project_upper(d, c, ELL)
        rhs = 1.0 - project_lower(1.0 - d, c, ELL)
        assert np.abs(lhs - rhs).max() < 1e-12


def test_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(30):
        d1 = rng.random(80)
        d2 = d1 + rng.uniform(0, 0.3, 80)
        c = 0.25
        assert np.all(project_lower(d1, c, ELL) <= project_lower(d2, c, ELL) + 1e-15)
        assert np.all(project_upper(d1, c, ELL) <= project_upper(d2, c, ELL) + 1e-15)


def test_sandwich_property():
    rng = np.random.default_rng(6)
    for _ in range(40):
        n = 90
        c = float(rng.uniform(0.05, 0.4))
        d_n = project_lower(rng.random(n) * 0.6, c, ELL)  # Lipschitz history
        d_bar = np.minimum(1.0, d_n + rng.exponential(0.2, n))
        lower = project_lower(d_bar, c, ELL)
        upper = project_upper(d_bar, c, ELL)
        assert np.all(d_n <= lower + 1e-12)
        assert np.all(lower <= d_bar + 1e-15)
        assert np.all(d_bar <= upper + 1e-15)
        assert np.all(upper <= 1.0 + 1e-15)


def test_active_intervals_empty_when_equal():
    bounds = ProjectionBounds(np.zeros(10), np.zeros(10))
    assert active_intervals(bounds) == []


def test_active_intervals_single_bump_with_guards():
    lower = np.zeros(30)
    upper = np.zeros(30)
    upper[10:15] = 0.1  # difference > tol on 10..14
    assert active_intervals(ProjectionBounds(lower, upper)) == [(9, 15)]


def test_active_intervals_two_bumps_separated():
    lower = np.zeros(30)
    upper = np.zeros(30)
    upper[5:8] = 0.1
    upper[10:13] = 0.1  # gap of exactly 2 equal elements (8, 9)
    assert active_intervals(ProjectionBounds(lower, upper)) == [(4, 8), (9, 13)]


def test_active_intervals_merge_single_element_gap():
    lower = np.zeros(30)
    upper = np.zeros(30)
    upper[5:8] = 0.1
    upper[9:12] = 0.1  # single equal element 8 between the runs
    assert active_intervals(ProjectionBounds(lower, upper)) == [(4, 12)]


def test_active_intervals_clamped_at_domain_ends():
    lower = np.zeros(10)
    upper = np.zeros(10)
    upper[0] = 0.1
    upper[9] = 0.1
    assert active_intervals(ProjectionBounds(lower, upper)) == [(0, 1), (8, 9)]


def test_compute_bounds_composes():
    rng = np.random.default_rng(7)
    d_bar = rng.random(50)
    b = compute_bounds(d_bar, 0.2, ELL)
    assert np.array_equal(b.lower, project_lower(d_bar, 0.2, ELL))
    assert np.array_equal(b.upper, project_upper(d_bar, 0.2, ELL))
    assert b.intervals == active_intervals(ProjectionBounds(b.lower, b.upper))
