#!/usr/bin/env python3
"""
格子モジュールのテスト
"""

import itertools
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from modlattice_cal import (
    estimate_second_moment,
    is_in_voronoi,
    lattice_for_power,
    make_lattice,
    mod_lattice,
    nearest_point,
    reference_second_moment,
    sample_dither,
    scale_to_power,
)
from modlattice_cal.algorithms.independence import two_sample_uniformity
from modlattice_cal.core.lattice import LATTICE_CATALOG
from modlattice_cal.generators.substreams import derive_rng


ALL_KINDS = [('scalar', None), ('cubic', 2), ('hexagonal_A2', None), ('D4', None), ('E8', None)]


def _box_candidates(x, shift, parity):
    """x の各座標の floor-1 .. floor+2 の候補（shift は剰余類のずれ）"""
    n = x.size
    base = np.floor(x - shift)
    offsets = np.array(list(itertools.product((-1, 0, 1, 2), repeat=n)), dtype=float)
    cand = base + offsets
    if parity:
        cand = cand[np.mod(cand.sum(axis=1), 2.0) == 0]
    return cand + shift


def brute_force_nearest(kind, x):
    if kind in ('scalar', 'cubic'):
        cand = _box_candidates(x, 0.0, parity=False)
    elif kind == 'D4':
        cand = _box_candidates(x, 0.0, parity=True)
    elif kind == 'E8':
        cand = np.vstack([
            _box_candidates(x, 0.0, parity=True),
            _box_candidates(x, 0.5, parity=True),
        ])
    else:
        g = make_lattice('hexagonal_A2').generator
        coeffs = np.array(list(itertools.product(range(-8, 9), repeat=2)), dtype=float)
        cand = coeffs @ g
    dist = np.sum((cand - x) ** 2, axis=1)
    return cand[np.argmin(dist)], float(np.min(dist))


def test_scalar_nearest_and_mod():
    lat = make_lattice('scalar', scale=4.0)
    assert nearest_point(lat, 5.0) == pytest.approx(4.0)
    assert mod_lattice(lat, 5.0) == pytest.approx(1.0)
    assert mod_lattice(lat, -5.0) == pytest.approx(-1.0)


def test_lattice_point_maps_to_itself():
    lat = make_lattice('cubic', dimension=2)
    np.testing.assert_array_equal(nearest_point(lat, np.zeros(2)), np.zeros(2))
    np.testing.assert_array_equal(mod_lattice(lat, np.zeros(2)), np.zeros(2))


def test_tie_breaks_to_lexicographically_smallest():
    lat = make_lattice('scalar')
    assert nearest_point(lat, 0.5) == 0.0
    assert nearest_point(lat, -0.5) == -1.0


@pytest.mark.parametrize('kind,dimension,count', [
    ('cubic', 3, 10 ** 4),
    ('hexagonal_A2', None, 10 ** 4),
    ('D4', None, 10 ** 4),
    ('E8', None, 1000),
])
def test_nearest_point_matches_brute_force(kind, dimension, count):
    lat = make_lattice(kind, dimension=dimension)
    rng = np.random.default_rng(1234)
    points = rng.uniform(-2.0, 2.0, size=(count, lat.dimension))
    fast = nearest_point(lat, points)
    for x, p in zip(points, fast):
        _, best = brute_force_nearest(kind, x)
        assert np.sum((x - p) ** 2) <= best + 1e-9


def test_mod_is_idempotent():
    rng = np.random.default_rng(99)
    for kind, dimension in ALL_KINDS:
        lat = make_lattice(kind, dimension=dimension, scale=1.3)
        once = mod_lattice(lat, rng.normal(size=(1000, lat.dimension)) * 5)
        np.testing.assert_array_equal(mod_lattice(lat, once), once)


@pytest.mark.parametrize('kind,dimension', ALL_KINDS)
def test_nearest_point_is_lattice_point(kind, dimension):
    lat = make_lattice(kind, dimension=dimension, scale=1.7)
    rng = np.random.default_rng(5)
    points = nearest_point(lat, rng.normal(size=(500, lat.dimension)) * 3)
    coeffs = np.linalg.solve(lat.scaled_generator.T, points.reshape(-1, lat.dimension).T)
    np.testing.assert_allclose(coeffs, np.round(coeffs), atol=1e-9)


def test_a2_mod_matches_brute_force():
    lat = make_lattice('hexagonal_A2')
    x = np.array([1.0, 0.9])
    p, _ = brute_force_nearest('hexagonal_A2', x)
    np.testing.assert_allclose(mod_lattice(lat, x), x - p, atol=1e-12)


@pytest.mark.parametrize('kind,dimension', ALL_KINDS)
def test_mod_lands_in_voronoi_and_is_shift_invariant(kind, dimension):
    lat = make_lattice(kind, dimension=dimension, scale=2.5)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2000, lat.dimension)) * 4
    folded = mod_lattice(lat, x)
    assert np.all(is_in_voronoi(lat, folded))
    np.testing.assert_allclose(nearest_point(lat, folded), 0.0, atol=1e-9)

    coeffs = rng.integers(-5, 6, size=(2000, lat.dimension)).astype(float)
    shifted = mod_lattice(lat, x + coeffs @ lat.scaled_generator)
    np.testing.assert_allclose(shifted, folded, atol=1e-9)


def test_mod_is_identity_inside_voronoi():
    lat = make_lattice('D4')
    x = np.array([0.2, -0.1, 0.3, 0.05])
    np.testing.assert_allclose(mod_lattice(lat, x), x)


def test_dimension_mismatch_raises():
    lat = make_lattice('E8')
    with pytest.raises(ValueError):
        nearest_point(lat, np.zeros(7))
    with pytest.raises(ValueError):
        mod_lattice(make_lattice('cubic', dimension=2), np.zeros(3))
    with pytest.raises(ValueError):
        make_lattice('D4', dimension=5)
    with pytest.raises(ValueError):
        nearest_point(lat, np.full(8, np.nan))


def test_scalar_dither_is_uniform():
    q = 3.0
    lat = make_lattice('scalar', scale=q)
    u = sample_dither(lat, derive_rng(1, 'dither_test'), size=10 ** 5).ravel()
    assert np.all(u >= -q / 2) and np.all(u <= q / 2)
    counts, _ = np.histogram(u, bins=np.linspace(-q / 2, q / 2, 51))
    assert chisquare(counts).pvalue >= 0.01


def test_cubic_dither_coordinates():
    lat = make_lattice('cubic', dimension=3)
    u = sample_dither(lat, np.random.default_rng(2), size=10 ** 5)
    assert u.shape == (10 ** 5, 3)
    assert np.all(np.abs(u) <= 0.5)
    corr = np.corrcoef(u.T)
    assert np.max(np.abs(corr - np.eye(3))) < 0.02


def test_a2_dither_mean_is_zero():
    lat = make_lattice('hexagonal_A2')
    u = sample_dither(lat, np.random.default_rng(3), size=10 ** 5)
    se = u.std(axis=0, ddof=1) / math.sqrt(u.shape[0])
    assert np.all(np.abs(u.mean(axis=0)) <= 3 * se)


def test_single_dither_shape():
    lat = make_lattice('E8')
    assert sample_dither(lat, np.random.default_rng(0)).shape == (8,)


def test_shifted_dither_is_distributed_as_dither():
    # 10 個の固定メッセージ × 5 種類の格子
    accepted = 0
    total = 0
    for k, (kind, dimension) in enumerate(ALL_KINDS):
        lat = make_lattice(kind, dimension=dimension)
        msg_rng = np.random.default_rng(100 + k)
        for j in range(10):
            t = msg_rng.normal(size=lat.dimension) * 3
            shifted = mod_lattice(lat, t + sample_dither(lat, derive_rng(k, 'dither/0', j), size=10 ** 5))
            reference = sample_dither(lat, derive_rng(k, 'dither_test', j), size=10 ** 5)
            _, _, ok = two_sample_uniformity(shifted, reference, alpha=0.01)
            accepted += ok
            total += 1
    assert accepted / total >= 0.95


def test_second_moment_scalar_closed_form():
    q = 3.0
    lat = make_lattice('scalar', scale=q)
    stats = estimate_second_moment(lat, 2 * 10 ** 5, np.random.default_rng(11))
    assert abs(stats.second_moment - q ** 2 / 12) <= 3 * stats.standard_error
    assert stats.reference == pytest.approx(q ** 2 / 12)


def test_second_moment_cubic_closed_form():
    lat = make_lattice('cubic', dimension=2)
    stats = estimate_second_moment(lat, 2 * 10 ** 5, np.random.default_rng(12))
    assert abs(stats.second_moment - 1 / 12) <= 3 * stats.standard_error


def test_second_moment_e8_reproducible_across_seeds():
    lat = make_lattice('E8')
    a = estimate_second_moment(lat, 10 ** 5, np.random.default_rng(21))
    b = estimate_second_moment(lat, 10 ** 5, np.random.default_rng(22))
    assert abs(a.second_moment - b.second_moment) <= 3 * math.hypot(a.standard_error, b.standard_error)
    assert abs(a.second_moment - 929 / 12960) <= 4 * a.standard_error


@pytest.mark.parametrize('kind,dimension', ALL_KINDS)
def test_normalized_second_moment_above_sphere_bound(kind, dimension):
    lat = make_lattice(kind, dimension=dimension, scale=0.7)
    stats = estimate_second_moment(lat, 5 * 10 ** 4, np.random.default_rng(31))
    assert stats.second_moment > 0
    assert stats.normalized_second_moment >= 1 / (2 * math.pi * math.e) - 1e-3
    g = LATTICE_CATALOG[kind]['normalized_second_moment']
    assert abs(stats.normalized_second_moment - g) <= 5 * stats.standard_error / stats.volume ** (2 / lat.dimension)


def test_second_moment_requires_enough_samples():
    with pytest.raises(ValueError):
        estimate_second_moment(make_lattice('scalar'), 1000, np.random.default_rng(0))


def test_scale_scalar_to_unit_power():
    lat = scale_to_power(make_lattice('scalar'), 1.0)
    assert lat.scale == pytest.approx(math.sqrt(12))
    assert reference_second_moment(lat) == pytest.approx(1.0)


def test_scale_to_power_is_idempotent():
    lat = lattice_for_power('hexagonal_A2', 1.5)
    again = scale_to_power(lat, 1.5)
    assert abs(again.scale - lat.scale) <= 1e-12


def test_scaled_cubic_meets_power():
    lat = lattice_for_power('cubic', 2.0, dimension=4)
    stats = estimate_second_moment(lat, 10 ** 6, np.random.default_rng(41))
    assert 1.96 <= stats.second_moment <= 2.04


def test_scale_to_power_rejects_non_positive():
    with pytest.raises(ValueError):
        scale_to_power(make_lattice('scalar'), 0.0)
    with pytest.raises(ValueError):
        scale_to_power(make_lattice('scalar'), -1.0)


def test_volumes():
    assert make_lattice('scalar', scale=4.0).volume == pytest.approx(4.0)
    assert make_lattice('hexagonal_A2').volume == pytest.approx(math.sqrt(3) / 2)
    assert make_lattice('D4').volume == pytest.approx(2.0)
    assert make_lattice('E8').volume == pytest.approx(1.0)
