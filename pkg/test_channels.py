#!/usr/bin/env python3
"""
チャネル動物園のテスト
"""

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from modlattice_cal import (
    ChannelModel,
    Preprocessor,
    build_channel_zoo,
    identity_preprocessor,
    sum_power,
    transmit_through,
)
from modlattice_cal.core.channels import noiseless_output, sample_noise


def _noiseless(structure, **kwargs):
    return ChannelModel('probe', 2, structure, 'gaussian', 0.0, **kwargs)


def test_noiseless_additive_sum():
    ch = _noiseless('additive_sum')
    y = transmit_through(ch, identity_preprocessor(2), np.array([[1.0], [2.0]]), np.random.default_rng(0))
    np.testing.assert_allclose(y, [3.0])


def test_noiseless_clipped_sum():
    ch = _noiseless('clipped_sum', clip_level=1.0)
    y = transmit_through(ch, identity_preprocessor(2), np.array([[2.0], [2.0]]), np.random.default_rng(0))
    np.testing.assert_allclose(y, [1.0])


def test_noiseless_cubic_and_weighted():
    x = np.array([[1.0, -0.5], [1.0, 0.25]])
    cubic = _noiseless('cubic_sum', cubic_coeff=0.5)
    np.testing.assert_allclose(noiseless_output(cubic, identity_preprocessor(2), x), [2.0 + 4.0, -0.25 - 0.0078125])
    weighted = _noiseless('weighted_sum', gains=(1.0, 3.0))
    np.testing.assert_allclose(noiseless_output(weighted, identity_preprocessor(2), x), [4.0, 0.25])


def test_multiplicative_without_noise_is_sum():
    ch = ChannelModel('m', 2, 'multiplicative', 'gaussian', 0.0)
    x = np.array([[0.3, 0.1], [0.4, -0.6]])
    np.testing.assert_allclose(transmit_through(ch, identity_preprocessor(2), x, np.random.default_rng(0)), [0.7, -0.5])


def test_preprocessor_maps():
    pre = Preprocessor(maps=(
        ('affine', {'a': 2.0, 'b': 0.5}),
        ('tanh', {'a': 2.0}),
        ('cubic_predistortion', {'kappa': 0.1}),
        'identity',
    ))
    x = np.array([0.5, -1.0])
    np.testing.assert_allclose(pre.apply(0, x), [1.5, -1.5])
    np.testing.assert_allclose(pre.apply(1, x), np.tanh(2 * x) / 2)
    np.testing.assert_allclose(pre.apply(2, x), x - 0.1 * x ** 3)
    np.testing.assert_array_equal(pre.apply(3, x), x)
    assert pre.num_users == 4


@pytest.mark.parametrize('law', ['gaussian', 'laplace', 'uniform', 'gaussian_mixture'])
def test_noise_variance(law):
    z = sample_noise(law, 0.5, 10 ** 6, np.random.default_rng(1))
    assert abs(z.mean()) < 0.005
    assert 0.49 <= z.var() <= 0.51


def test_awgn_residual_variance():
    ch = ChannelModel('awgn', 2, 'additive_sum', 'gaussian', 1.0)
    rng = np.random.default_rng(2)
    x = rng.uniform(-1.0, 1.0, size=(2, 10 ** 6, 1))
    y = transmit_through(ch, identity_preprocessor(2), x, rng)
    resid = y - x.sum(axis=0)
    assert 0.98 <= resid.var() <= 1.02


def test_same_seed_same_output():
    ch = build_channel_zoo(2, 1.0)['impulsive']
    x = np.zeros((2, 100, 3))
    a = transmit_through(ch, identity_preprocessor(2), x, np.random.default_rng(9))
    b = transmit_through(ch, identity_preprocessor(2), x, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_coordinates_are_independent():
    ch = build_channel_zoo(2, 1.0)['clipped']
    x = np.tile(np.array([0.3, -0.2]), (2, 10 ** 5, 1))
    y = transmit_through(ch, identity_preprocessor(2), x, np.random.default_rng(4))
    q0 = np.quantile(y[:, 0], [0.2, 0.4, 0.6, 0.8])
    q1 = np.quantile(y[:, 1], [0.2, 0.4, 0.6, 0.8])
    table = np.zeros((5, 5))
    np.add.at(table, (np.searchsorted(q0, y[:, 0]), np.searchsorted(q1, y[:, 1])), 1)
    assert chi2_contingency(table).pvalue >= 0.01


def test_sum_power():
    ch2 = ChannelModel('a', 2)
    ch4 = ChannelModel('b', 4)
    assert sum_power(ch2, 1.0) == 2.0
    assert sum_power(ChannelModel('c', 1), 3.0) == 3.0
    assert sum_power(ch4, 0.5) == 2.0
    with pytest.raises(ValueError):
        sum_power(ch2, 0.0)


def test_zoo_contents():
    zoo = build_channel_zoo(2, 1.0)
    assert set(zoo) == {
        'awgn', 'laplace', 'uniform_noise', 'impulsive',
        'clipped', 'cubic', 'weighted', 'multiplicative',
    }
    assert zoo['awgn'].noise_var == pytest.approx(0.2)
    assert zoo['weighted'].gains == (1.0, 1.5)
    assert zoo['clipped'].clip_level == pytest.approx(0.8 * np.sqrt(2.0))


def test_invalid_inputs():
    ch = ChannelModel('awgn', 2)
    with pytest.raises(ValueError):
        transmit_through(ch, identity_preprocessor(2), np.zeros((3, 1)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        transmit_through(ch, identity_preprocessor(3), np.zeros((2, 1)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        transmit_through(ch, identity_preprocessor(2), np.array([[np.inf], [0.0]]), np.random.default_rng(0))
    with pytest.raises(ValueError):
        ChannelModel('bad', 2, structure='max_sum')
    with pytest.raises(ValueError):
        ChannelModel('bad', 2, noise_law='cauchy')
    with pytest.raises(ValueError):
        ChannelModel('bad', 2, gains=(1.0,))
    with pytest.raises(ValueError):
        Preprocessor(maps=(('square', {}),))
