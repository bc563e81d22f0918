"""
チャネルモジュール

K ユーザー無記憶 MAC チャネルのモデル群（チャネル動物園）と
送信側の前処理を提供します。

構造 (structure):
    additive_sum   : Σ f_i(x_i) + Z
    clipped_sum    : clamp(Σ f_i(x_i), -c, c) + Z
    cubic_sum      : s + κ·s³ + Z   (s = Σ f_i(x_i))
    weighted_sum   : Σ h_i·f_i(x_i) + Z
    multiplicative : (Σ f_i(x_i))·(1 + Z)

雑音則 (noise_law) はすべて平均0・分散 σ² でパラメータ化する:
    gaussian, laplace (b = sqrt(σ²/2)), uniform (a = sqrt(3σ²)),
    gaussian_mixture (重み (0.9, 0.1)、分散 (σ²/2, 5.5σ²))
"""

import math
from dataclasses import dataclass, field

import numpy as np


STRUCTURES = ('additive_sum', 'clipped_sum', 'cubic_sum', 'weighted_sum', 'multiplicative')
NOISE_LAWS = ('gaussian', 'laplace', 'uniform', 'gaussian_mixture')
PREPROCESSOR_KINDS = ('identity', 'affine', 'tanh', 'cubic_predistortion')

DEFAULT_MIXTURE_WEIGHTS = (0.9, 0.1)
DEFAULT_MIXTURE_VAR_RATIOS = (0.5, 5.5)


@dataclass(frozen=True)
class ChannelModel:
    """
    K ユーザー無記憶チャネル p(y | x_1, ..., x_K)

    n 次元入力は座標ごとに独立な雑音で処理される。
    """
    name: str
    num_users: int
    structure: str = 'additive_sum'
    noise_law: str = 'gaussian'
    noise_var: float = 1.0
    clip_level: float = 1.0
    cubic_coeff: float = 0.0
    gains: tuple = ()
    mixture_weights: tuple = DEFAULT_MIXTURE_WEIGHTS
    mixture_var_ratios: tuple = DEFAULT_MIXTURE_VAR_RATIOS

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError(f"num_users は1以上である必要があります: {self.num_users}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"未知のチャネル構造です: {self.structure}")
        if self.noise_law not in NOISE_LAWS:
            raise ValueError(f"未知の雑音則です: {self.noise_law}")
        if self.noise_var < 0:
            raise ValueError(f"noise_var は非負である必要があります: {self.noise_var}")
        if not self.clip_level > 0:
            raise ValueError(f"clip_level は正である必要があります: {self.clip_level}")
        gains = tuple(float(h) for h in self.gains) or (1.0,) * self.num_users
        if len(gains) != self.num_users:
            raise ValueError(
                f"gains の長さ {len(gains)} がユーザー数 {self.num_users} と一致しません"
            )
        object.__setattr__(self, 'gains', gains)
        if self.noise_law == 'gaussian_mixture':
            weights = np.asarray(self.mixture_weights, dtype=float)
            ratios = np.asarray(self.mixture_var_ratios, dtype=float)
            if weights.shape != ratios.shape or np.any(weights < 0) or np.any(ratios < 0):
                raise ValueError("混合分布の重み・分散比が不正です")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError(f"混合重みの和が1ではありません: {weights.sum()}")

    def describe(self):
        return {
            'name': self.name,
            'num_users': self.num_users,
            'structure': self.structure,
            'noise_law': self.noise_law,
            'noise_var': self.noise_var,
            'clip_level': self.clip_level,
            'cubic_coeff': self.cubic_coeff,
            'gains': list(self.gains),
        }


@dataclass(frozen=True)
class Preprocessor:
    """
    ユーザーごとの前処理 f_i（座標ごとに適用する決定的な写像）

    maps: ユーザーごとの (kind, params) のタプル
        identity              : f(x) = x
        affine (a, b)         : f(x) = a·x + b
        tanh (a)              : f(x) = tanh(a·x) / a
        cubic_predistortion(κ): f(x) = x - κ·x³
    """
    maps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        normalized = []
        for entry in self.maps:
            kind, params = entry if isinstance(entry, tuple) else (entry, {})
            if kind not in PREPROCESSOR_KINDS:
                raise ValueError(f"未知の前処理です: {kind}")
            params = dict(params)
            if kind == 'tanh' and not params.get('a', 1.0) > 0:
                raise ValueError(f"tanh の a は正である必要があります: {params.get('a')}")
            normalized.append((kind, params))
        object.__setattr__(self, 'maps', tuple(normalized))

    @property
    def num_users(self):
        return len(self.maps)

    def apply(self, user, x):
        """ユーザー user の前処理を座標ごとに適用"""
        kind, params = self.maps[user]
        if kind == 'identity':
            return x
        if kind == 'affine':
            return params.get('a', 1.0) * x + params.get('b', 0.0)
        if kind == 'tanh':
            a = params.get('a', 1.0)
            return np.tanh(a * x) / a
        kappa = params.get('kappa', 0.0)
        return x - kappa * x ** 3


def identity_preprocessor(num_users):
    """全ユーザー恒等写像の前処理"""
    return Preprocessor(maps=tuple(('identity', {}) for _ in range(num_users)))


def sample_noise(law, noise_var, shape, rng, mixture_weights=DEFAULT_MIXTURE_WEIGHTS,
                 mixture_var_ratios=DEFAULT_MIXTURE_VAR_RATIOS):
    """
    平均0・分散 noise_var の雑音を生成

    Args:
        law: 雑音則
        noise_var: 分散 σ²
        shape: 出力形状
        rng: np.random.Generator

    Returns:
        np.ndarray
    """
    if noise_var == 0:
        return np.zeros(shape)
    if law == 'gaussian':
        return rng.normal(0.0, math.sqrt(noise_var), size=shape)
    if law == 'laplace':
        return rng.laplace(0.0, math.sqrt(noise_var / 2.0), size=shape)
    if law == 'uniform':
        half_width = math.sqrt(3.0 * noise_var)
        return rng.uniform(-half_width, half_width, size=shape)
    if law == 'gaussian_mixture':
        weights = np.asarray(mixture_weights, dtype=float)
        ratios = np.asarray(mixture_var_ratios, dtype=float)
        # 全体の分散が noise_var になるよう正規化
        ratios = ratios / float(np.dot(weights, ratios))
        component = rng.choice(len(weights), size=shape, p=weights)
        std = np.sqrt(ratios[component] * noise_var)
        return rng.normal(0.0, 1.0, size=shape) * std
    raise ValueError(f"未知の雑音則です: {law}")


def noiseless_output(ch, pre, x):
    """雑音なしの出力部分（乗法チャネルでは係数 (1+Z) を掛ける前の和）"""
    shaped = np.stack([pre.apply(i, x[i]) for i in range(ch.num_users)])
    if ch.structure == 'weighted_sum':
        gains = np.asarray(ch.gains).reshape((-1,) + (1,) * (shaped.ndim - 1))
        return np.sum(gains * shaped, axis=0)
    s = np.sum(shaped, axis=0)
    if ch.structure == 'clipped_sum':
        return np.clip(s, -ch.clip_level, ch.clip_level)
    if ch.structure == 'cubic_sum':
        return s + ch.cubic_coeff * s ** 3
    return s


def transmit_through(ch, pre, x, rng):
    """
    チャネル出力 y をサンプリング

    Args:
        ch: ChannelModel
        pre: Preprocessor
        x: 形状 (K, ..., n) の入力（K 個の同じ形状のベクトル）
        rng: np.random.Generator

    Returns:
        np.ndarray: 形状 (..., n) の出力 y
    """
    x = np.asarray(x, dtype=float)
    if x.ndim < 2 or x.shape[0] != ch.num_users:
        raise ValueError(
            f"入力はユーザー数 {ch.num_users} 個の同じ長さのベクトルである必要があります: shape={x.shape}"
        )
    if pre.num_users != ch.num_users:
        raise ValueError(
            f"前処理のユーザー数 {pre.num_users} がチャネルのユーザー数 {ch.num_users} と一致しません"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("入力に有限でない値が含まれています")

    clean = noiseless_output(ch, pre, x)
    noise = sample_noise(
        ch.noise_law, ch.noise_var, clean.shape, rng,
        ch.mixture_weights, ch.mixture_var_ratios,
    )
    if ch.structure == 'multiplicative':
        return clean * (1.0 + noise)
    return clean + noise


def sum_power(ch, P):
    """独立・平均0のユーザーに対する E[S²] = K·P"""
    if not P > 0:
        raise ValueError(f"P は正である必要があります: {P}")
    return ch.num_users * P


def build_channel_zoo(num_users, P, noise_var=None):
    """
    標準的なチャネル群を生成

    Args:
        num_users: ユーザー数 K
        P: ユーザーごとの電力
        noise_var: 雑音分散（省略時は 0.1·K·P）

    Returns:
        dict: 名前 → ChannelModel
    """
    total = sum_power(ChannelModel(name='probe', num_users=num_users), P)
    var = 0.1 * total if noise_var is None else noise_var
    clip = 0.8 * math.sqrt(total)
    gains = tuple(1.0 + 0.5 * i for i in range(num_users))
    cubic_coeff = 0.2 / total

    zoo = [
        ChannelModel('awgn', num_users, 'additive_sum', 'gaussian', var),
        ChannelModel('laplace', num_users, 'additive_sum', 'laplace', var),
        ChannelModel('uniform_noise', num_users, 'additive_sum', 'uniform', var),
        ChannelModel('impulsive', num_users, 'additive_sum', 'gaussian_mixture', var),
        ChannelModel('clipped', num_users, 'clipped_sum', 'gaussian', var, clip_level=clip),
        ChannelModel('cubic', num_users, 'cubic_sum', 'gaussian', var, cubic_coeff=cubic_coeff),
        ChannelModel('weighted', num_users, 'weighted_sum', 'gaussian', var, gains=gains),
        ChannelModel('multiplicative', num_users, 'multiplicative', 'gaussian', var / total),
    ]
    return {ch.name: ch for ch in zoo}
