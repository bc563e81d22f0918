#!/usr/bin/env python3
"""
離散 Z_q オラクルのテスト
"""

import numpy as np
import pytest

from modlattice_cal import (
    DiscreteSystem,
    exact_noise_distribution,
    max_pairwise_tv,
    simulate_discrete,
    total_variation,
)
from modlattice_cal.core.discrete import clipped_adder_system, modular_adder_system, random_system


def test_noiseless_modular_adder_is_point_mass():
    sys = modular_adder_system(7, flip_prob=0.0)
    expected = np.zeros(7)
    expected[0] = 1.0
    np.testing.assert_allclose(exact_noise_distribution(sys, (3, 5)), expected)


def test_modular_adder_noise_law():
    sys = modular_adder_system(7, flip_prob=0.1)
    expected = np.array([0.8, 0.1, 0.0, 0.0, 0.0, 0.0, 0.1])
    np.testing.assert_allclose(exact_noise_distribution(sys, (2, 6)), expected, atol=1e-12)


@pytest.mark.parametrize('make', [
    lambda: modular_adder_system(7),
    lambda: clipped_adder_system(5),
    lambda: random_system(5, 2, 6, np.random.default_rng(1)),
])
def test_noise_law_does_not_depend_on_messages(make):
    sys = make()
    assert max_pairwise_tv(sys) <= 1e-12


def test_three_user_system():
    sys = random_system(5, 3, 4, np.random.default_rng(2))
    assert max_pairwise_tv(sys, max_tuples=40) <= 1e-12
    assert exact_noise_distribution(sys, (0, 1, 4)).sum() == pytest.approx(1.0)


def test_simulation_matches_exact_law():
    sys = random_system(5, 2, 6, np.random.default_rng(3))
    exact = exact_noise_distribution(sys, (1, 3))
    sim = simulate_discrete(sys, (1, 3), 10 ** 5, np.random.default_rng(4))
    assert total_variation(sim, exact) <= 0.05


def test_simulation_without_noise_is_exact():
    sys = modular_adder_system(11, flip_prob=0.0)
    sim = simulate_discrete(sys, (4, 9), 10 ** 4, np.random.default_rng(5))
    assert total_variation(sim, exact_noise_distribution(sys, (4, 9))) == 0.0


def test_simulation_is_reproducible():
    sys = clipped_adder_system(7)
    a = simulate_discrete(sys, (0, 6), 10 ** 4, np.random.default_rng(6))
    b = simulate_discrete(sys, (0, 6), 10 ** 4, np.random.default_rng(6))
    np.testing.assert_array_equal(a, b)


def test_simulation_converges():
    sys = modular_adder_system(7)
    exact = exact_noise_distribution(sys, (1, 2))
    tv = [
        total_variation(simulate_discrete(sys, (1, 2), n, np.random.default_rng(7)), exact)
        for n in (10 ** 4, 10 ** 5, 10 ** 6)
    ]
    assert tv[2] < tv[0]
    assert tv[2] < 0.005


def test_total_variation():
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    with pytest.raises(ValueError):
        total_variation([1.0], [0.5, 0.5])


def test_system_validation():
    with pytest.raises(ValueError):
        modular_adder_system(4)
    with pytest.raises(ValueError):
        modular_adder_system(65)
    table = np.full((5, 5, 3), 0.5)
    with pytest.raises(ValueError):
        DiscreteSystem(q=5, num_users=2, table=table, estimator=np.zeros(3))
    with pytest.raises(ValueError):
        DiscreteSystem(q=5, num_users=2, table=np.full((5, 5, 2), 0.5), estimator=np.array([0, 7]))
    with pytest.raises(ValueError):
        simulate_discrete(modular_adder_system(5), (0, 0), 1000, np.random.default_rng(0))
    with pytest.raises(ValueError):
        exact_noise_distribution(modular_adder_system(5), (0, 0, 0))
