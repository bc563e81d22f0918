"""
格子モジュール

格子 Λ とそのボロノイ領域 V に関する基本演算を提供します。
- nearest_point: 最近格子点（閉形式の剰余類デコーダ）
- mod_lattice: x mod Λ （x - 最近格子点、結果は V 内）
- sample_dither: V 上の一様ディザ
- estimate_second_moment: 二次モーメント σ²(Λ) のモンテカルロ推定
- scale_to_power: 二次モーメントが P になるようにスケーリング

対応する格子: scalar (Z), cubic (Z^n), hexagonal_A2, D4, E8
生成行列は行ベクトルが基底（格子点 = 整数ベクトル @ generator）。
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np


_SQRT3 = math.sqrt(3.0)

# 正規化二次モーメント G(Λ)、座標ごとのボロノイ半幅（スケール1）
LATTICE_CATALOG = {
    'scalar': {
        'dimension': 1,
        'normalized_second_moment': 1.0 / 12.0,
        'half_extent': 0.5,
    },
    'cubic': {
        'dimension': None,
        'normalized_second_moment': 1.0 / 12.0,
        'half_extent': 0.5,
    },
    'hexagonal_A2': {
        'dimension': 2,
        'normalized_second_moment': 5.0 / (36.0 * _SQRT3),
        'half_extent': 1.0 / _SQRT3,
    },
    'D4': {
        'dimension': 4,
        'normalized_second_moment': 13.0 / (120.0 * math.sqrt(2.0)),
        'half_extent': 1.0,
    },
    'E8': {
        'dimension': 8,
        'normalized_second_moment': 929.0 / 12960.0,
        'half_extent': 1.0,
    },
}

VORONOI_TOLERANCE = 1e-9


def base_generator(kind, dimension=None):
    """
    スケール1の生成行列を返す

    Args:
        kind: 格子の種類
        dimension: cubic の場合の次元

    Returns:
        np.ndarray: n×n 生成行列（行が基底ベクトル）
    """
    if kind == 'scalar':
        return np.array([[1.0]])
    if kind == 'cubic':
        if dimension is None or dimension < 1:
            raise ValueError(f"cubic 格子の次元は正の整数である必要があります: {dimension}")
        return np.eye(dimension)
    if kind == 'hexagonal_A2':
        return np.array([
            [1.0, 0.0],
            [0.5, _SQRT3 / 2.0],
        ])
    if kind == 'D4':
        return np.array([
            [-1.0, -1.0, 0.0, 0.0],
            [1.0, -1.0, 0.0, 0.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
        ])
    if kind == 'E8':
        return np.array([
            [2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0],
            [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
        ])
    raise ValueError(
        f"未知の格子です: {kind} (scalar, cubic, hexagonal_A2, D4, E8 のいずれか)"
    )


@dataclass(frozen=True, eq=False)
class Lattice:
    """
    格子 Λ = scale · (generator の行の整数結合)

    基本領域は常にボロノイ領域 V（nearest_point により実現）。
    """
    name: str
    dimension: int
    generator: np.ndarray
    scale: float = 1.0
    quantizer_kind: str = 'cubic'

    def __post_init__(self):
        if self.quantizer_kind not in LATTICE_CATALOG:
            raise ValueError(f"未知の quantizer_kind です: {self.quantizer_kind}")
        if self.dimension < 1:
            raise ValueError(f"次元は正の整数である必要があります: {self.dimension}")
        generator = np.asarray(self.generator, dtype=float)
        if generator.shape != (self.dimension, self.dimension):
            raise ValueError(
                f"生成行列の形状 {generator.shape} が次元 {self.dimension} と一致しません"
            )
        if not self.scale > 0:
            raise ValueError(f"scale は正である必要があります: {self.scale}")
        if abs(np.linalg.det(generator)) < 1e-12:
            raise ValueError("生成行列がフルランクではありません")
        object.__setattr__(self, 'generator', generator)

    @property
    def scaled_generator(self):
        return self.scale * self.generator

    @property
    def volume(self):
        """|det(generator)| · scale^n"""
        return abs(np.linalg.det(self.generator)) * self.scale ** self.dimension

    @property
    def log_volume_per_dim(self):
        """(1/n)·log volume(V) [nats]"""
        return math.log(self.volume) / self.dimension

    @property
    def half_extent(self):
        """V の各座標の絶対値の上限"""
        return LATTICE_CATALOG[self.quantizer_kind]['half_extent'] * self.scale

    def describe(self):
        return {
            'name': self.name,
            'kind': self.quantizer_kind,
            'dimension': self.dimension,
            'scale': self.scale,
            'volume': self.volume,
            'second_moment': reference_second_moment(self),
        }


def make_lattice(kind, dimension=None, scale=1.0, name=None):
    """
    種類名から格子を生成

    Args:
        kind: 'scalar', 'cubic', 'hexagonal_A2', 'D4', 'E8'
        dimension: 次元（cubic 以外は固定値と一致する必要あり）
        scale: スケール倍率
        name: 識別名（省略時は kind）

    Returns:
        Lattice
    """
    if kind not in LATTICE_CATALOG:
        raise ValueError(
            f"未知の格子です: {kind} (scalar, cubic, hexagonal_A2, D4, E8 のいずれか)"
        )
    fixed = LATTICE_CATALOG[kind]['dimension']
    if fixed is not None:
        if dimension is not None and dimension != fixed:
            raise ValueError(f"{kind} の次元は {fixed} です（指定: {dimension}）")
        dimension = fixed
    generator = base_generator(kind, dimension)
    return Lattice(
        name=name or kind,
        dimension=dimension,
        generator=generator,
        scale=float(scale),
        quantizer_kind=kind,
    )


# ============================================================================
# 最近格子点（スケール1、(m, n) 配列に対してベクトル化）
# ============================================================================

def _round_half_down(x):
    # 0.5 ちょうどは小さい側へ（辞書順最小）
    return np.ceil(x - 0.5)


def _lex_less(a, b):
    """行ごとに a < b（辞書順）かどうか"""
    diff = a - b
    nonzero = np.abs(diff) > 1e-12
    first = np.argmax(nonzero, axis=1)
    rows = np.arange(len(first))
    return nonzero[rows, first] & (diff[rows, first] < 0)


def _closer(x, a, b, tol=1e-12):
    """候補 a, b のうち x に近い方（同距離なら辞書順で小さい方）"""
    dist_a = np.sum((x - a) ** 2, axis=1)
    dist_b = np.sum((x - b) ** 2, axis=1)
    pick_b = dist_b < dist_a - tol
    tie = np.abs(dist_a - dist_b) <= tol
    if np.any(tie):
        pick_b[tie] = _lex_less(b[tie], a[tie])
    return np.where(pick_b[:, None], b, a)


def _nearest_integer(x):
    return _round_half_down(x)


def _nearest_dn(x):
    """
    D_n（座標和が偶数の整数ベクトル）の最近点

    丸めた結果の座標和が奇数なら、丸め誤差が最大の座標を
    反対側の整数に付け替える。
    """
    f = _round_half_down(x)
    odd = np.mod(np.sum(f, axis=1), 2.0) != 0
    if np.any(odd):
        xo = x[odd]
        fo = f[odd]
        k = np.argmax(np.abs(xo - fo), axis=1)
        rows = np.arange(len(k))
        xk = xo[rows, k]
        fk = fo[rows, k]
        fo[rows, k] = fk + np.where(xk > fk, 1.0, -1.0)
        f[odd] = fo
    return f


def _nearest_e8(x):
    """E8 = D8 ∪ (D8 + ½·1) の2つの剰余類から近い方"""
    y0 = _nearest_dn(x)
    y1 = _nearest_dn(x - 0.5) + 0.5
    return _closer(x, y0, y1)


def _nearest_a2(x):
    """A2 = R ∪ (R + (½, √3/2))、R = Z × √3·Z"""
    def rect(z):
        return np.stack([
            _round_half_down(z[:, 0]),
            _round_half_down(z[:, 1] / _SQRT3) * _SQRT3,
        ], axis=1)

    shift = np.array([0.5, _SQRT3 / 2.0])
    y0 = rect(x)
    y1 = rect(x - shift) + shift
    return _closer(x, y0, y1)


_QUANTIZERS = {
    'scalar': _nearest_integer,
    'cubic': _nearest_integer,
    'hexagonal_A2': _nearest_a2,
    'D4': _nearest_dn,
    'E8': _nearest_e8,
}


def _as_points(lat, x):
    """入力を (m, n) 配列に整形し、元の形状も返す"""
    arr = np.asarray(x, dtype=float)
    shape = arr.shape
    if lat.dimension == 1:
        flat = arr.reshape(-1, 1)
    else:
        if arr.ndim == 0 or shape[-1] != lat.dimension:
            raise ValueError(
                f"次元が一致しません: 入力の最終次元 {shape[-1] if arr.ndim else 0}, 格子の次元 {lat.dimension}"
            )
        flat = arr.reshape(-1, lat.dimension)
    if not np.all(np.isfinite(flat)):
        raise ValueError("入力に有限でない値が含まれています")
    return flat, shape


def _leading_shape(lat, shape):
    """点ごとの結果（bool など）の形状"""
    if lat.dimension == 1 and (len(shape) == 0 or shape[-1] != 1):
        return shape
    return shape[:-1]


def nearest_point(lat, x):
    """
    最近格子点を計算する

    Args:
        lat: Lattice
        x: 長さ n のベクトル、または (..., n) の配列

    Returns:
        np.ndarray: x と同じ形状の格子点
    """
    flat, shape = _as_points(lat, x)
    points = lat.scale * _QUANTIZERS[lat.quantizer_kind](flat / lat.scale)
    return points.reshape(shape)


def mod_lattice(lat, x):
    """x mod Λ = x - nearest_point(x) （結果はボロノイ領域 V 内）"""
    flat, shape = _as_points(lat, x)
    points = lat.scale * _QUANTIZERS[lat.quantizer_kind](flat / lat.scale)
    return (flat - points).reshape(shape)


def is_in_voronoi(lat, x, tol=VORONOI_TOLERANCE):
    """
    各点がボロノイ領域 V に含まれるか判定

    原点が最近格子点（tol 以内）であれば V 内とみなす。
    境界上の点は両側の V に属するものとして扱う。

    Returns:
        np.ndarray: 点ごとの bool
    """
    flat, shape = _as_points(lat, x)
    points = lat.scale * _QUANTIZERS[lat.quantizer_kind](flat / lat.scale)
    to_origin = np.linalg.norm(flat, axis=1)
    to_nearest = np.linalg.norm(flat - points, axis=1)
    return (to_origin <= to_nearest + tol).reshape(_leading_shape(lat, shape))


def sample_dither(lat, rng, size=None):
    """
    V 上の一様分布からディザを生成

    基本平行体上の一様サンプルを mod Λ で V に折り返す
    （平行体は Λ で空間をタイルするため一様性が保たれる）。

    Args:
        lat: Lattice
        rng: np.random.Generator
        size: None なら1ベクトル (n,)、整数なら (size, n)

    Returns:
        np.ndarray
    """
    count = 1 if size is None else int(size)
    z = rng.random((count, lat.dimension))
    samples = mod_lattice(lat, z @ lat.scaled_generator)
    if size is None:
        return samples[0]
    return samples


# ============================================================================
# 二次モーメント
# ============================================================================

@dataclass
class LatticeStats:
    """二次モーメントの推定結果"""
    second_moment: float
    standard_error: float
    normalized_second_moment: float
    volume: float
    num_samples: int
    reference: float = field(default=float('nan'))


def reference_second_moment(lat):
    """
    既知の G(Λ) から求めた二次モーメント σ² = G · volume^(2/n)

    scalar (q²/12)、cubic (scale²/12) は閉形式の積分値と一致する。
    """
    g = LATTICE_CATALOG[lat.quantizer_kind]['normalized_second_moment']
    return g * lat.volume ** (2.0 / lat.dimension)


def estimate_second_moment(lat, num_samples, rng, chunk_size=200_000):
    """
    σ²(Λ) = (1/n)·E‖U‖² （U は V 上一様）をモンテカルロ推定

    Args:
        lat: Lattice
        num_samples: サンプル数（10^4 以上）
        rng: np.random.Generator
        chunk_size: 一度に生成するサンプル数

    Returns:
        LatticeStats
    """
    if num_samples < 10 ** 4:
        raise ValueError(f"num_samples は 10^4 以上である必要があります: {num_samples}")

    total = 0.0
    total_sq = 0.0
    remaining = int(num_samples)
    while remaining > 0:
        count = min(chunk_size, remaining)
        u = sample_dither(lat, rng, size=count)
        per_dim = np.sum(u ** 2, axis=1) / lat.dimension
        total += float(np.sum(per_dim))
        total_sq += float(np.sum(per_dim ** 2))
        remaining -= count

    mean = total / num_samples
    variance = max(total_sq / num_samples - mean ** 2, 0.0) * num_samples / (num_samples - 1)
    volume = lat.volume
    return LatticeStats(
        second_moment=mean,
        standard_error=math.sqrt(variance / num_samples),
        normalized_second_moment=mean / volume ** (2.0 / lat.dimension),
        volume=volume,
        num_samples=int(num_samples),
        reference=reference_second_moment(lat),
    )


def scale_to_power(lat, P):
    """
    二次モーメントが P になるように格子をスケーリング

    scale ← scale · sqrt(P / σ²_current)。σ²_current は既知の G(Λ) から
    求めるため、同じ P で再度呼んでもスケールは変わらない。
    """
    if not P > 0:
        raise ValueError(f"P は正である必要があります: {P}")
    factor = math.sqrt(P / reference_second_moment(lat))
    return replace(lat, scale=lat.scale * factor)


def lattice_for_power(kind, P, dimension=None, name=None):
    """種類名と目標電力 P から、スケール済みの格子を生成"""
    return scale_to_power(make_lattice(kind, dimension=dimension, name=name), P)
