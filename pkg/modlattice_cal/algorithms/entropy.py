"""
雑音エントロピー・達成レートモジュール

プラグイン・ヒストグラム推定による微分エントロピー
    h = -Σ p_b · log(p_b / w_b)
と、一様入力における mod-Λ チャネルのレート
    R = (1/n)·log volume(V) - h(N mod Λ)
を計算する。単位はすべて nats / 次元。

折り返し雑音は格子基底の座標 z = x·G⁻¹（[-1/2, 1/2)^n に折り返す）でもビン分けし、
    h(x)/n = h(z)/n + (1/n)·log|det G|
で元の座標に戻す。V 上一様な雑音は z で一様になるので (1/n)·log volume(V) を返す。
n > 1 の場合は座標をプールした周辺分布のエントロピーを使う。
基底座標と元の座標のうち小さい方を採用する
（cubic 格子では厳密、それ以外では同時エントロピーの上界 = レートの下界）。
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..core.lattice import VORONOI_TOLERANCE, is_in_voronoi


DEFAULT_FOLDED_BINS = 256
RECOMMENDED_SAMPLES = 10 ** 5
MIN_OCCUPIED_BINS = 8


@dataclass
class EntropyEstimate:
    """ヒストグラム・エントロピー推定値と不確かさ"""
    entropy: float
    num_bins: int
    occupied_bins: int
    num_samples: int
    sensitivity_delta: float
    standard_error: float
    uncertainty: float
    resolution_limited: bool
    coordinates: str = 'cartesian'
    edges: np.ndarray = field(repr=False, default=None)
    counts: np.ndarray = field(repr=False, default=None)


def _pooled(samples):
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ValueError("サンプルが空です")
    return values.ravel()


def _histogram_entropy(values, edges):
    """
    固定ビンでのプラグイン微分エントロピー

    Returns:
        tuple: (entropy, occupied, standard_error, counts)
    """
    counts, _ = np.histogram(values, bins=edges)
    widths = np.diff(edges)
    N = values.size
    p = counts / N
    occupied = p > 0
    log_density = np.zeros_like(p)
    log_density[occupied] = np.log(p[occupied] / widths[occupied])
    h = -float(np.sum(p[occupied] * log_density[occupied]))
    # サンプルごとの -log f̂(x) の標準誤差
    second = float(np.sum(p[occupied] * log_density[occupied] ** 2))
    variance = max(second - h ** 2, 0.0)
    return h, int(np.sum(occupied)), math.sqrt(variance / N), counts


def _estimate(values, lo, hi, num_bins, log_jacobian=0.0, coordinates='cartesian', warn=True):
    if num_bins < 2:
        raise ValueError(f"num_bins は2以上である必要があります: {num_bins}")
    N = values.size
    if warn and N < RECOMMENDED_SAMPLES:
        warnings.warn(
            f"サンプル数 {N} は推奨値 {RECOMMENDED_SAMPLES} 未満です（エントロピー推定の偏りが大きくなります）",
            RuntimeWarning,
        )
    if not hi > lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, num_bins + 1)
    h, occupied, se, counts = _histogram_entropy(values, edges)
    h_half, _, _, _ = _histogram_entropy(values, np.linspace(lo, hi, num_bins // 2 + 1))
    delta = abs(h - h_half)
    uncertainty = 2.0 * math.sqrt(delta ** 2 + se ** 2) + (occupied - 1) / (2.0 * N)
    return EntropyEstimate(
        entropy=h + log_jacobian,
        num_bins=num_bins,
        occupied_bins=occupied,
        num_samples=N,
        sensitivity_delta=delta,
        standard_error=se,
        uncertainty=uncertainty,
        resolution_limited=occupied < MIN_OCCUPIED_BINS,
        coordinates=coordinates,
        edges=edges,
        counts=counts,
    )


def estimate_entropy_folded(samples, lattice, num_bins=DEFAULT_FOLDED_BINS):
    """
    V 上の折り返し雑音の微分エントロピー

    基底座標 z では区間 [-1/2, 1/2] を、元の座標では [-r, r]（r は格子の半幅）を等分する。
    どちらのプール周辺エントロピーも同時エントロピー / n の上界なので、
    cubic 以外の格子では小さい方を返す（coordinates に 'basis' / 'cartesian' を記録）。
    edges と counts は選んだ座標系で表す。

    Args:
        samples: 折り返し雑音 (N,) または (N, n)、すべて V 内
        lattice: Lattice
        num_bins: ビン数

    Returns:
        EntropyEstimate: nats / 次元
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("サンプルが空です")
    if not np.all(is_in_voronoi(lattice, arr, VORONOI_TOLERANCE)):
        raise ValueError("ボロノイ領域 V の外にあるサンプルが含まれています")
    z = np.clip(_pooled(basis_coordinates(lattice, arr)), -0.5, 0.5)
    basis = _estimate(z, -0.5, 0.5, num_bins,
                      log_jacobian=lattice.log_volume_per_dim, coordinates='basis')
    if np.array_equal(lattice.generator, np.eye(lattice.dimension)):
        return basis
    r = lattice.half_extent
    cartesian = _estimate(np.clip(_pooled(arr), -r, r), -r, r, num_bins, warn=False)
    return cartesian if cartesian.entropy < basis.entropy else basis


def basis_coordinates(lattice, samples):
    """
    x = z·G となる基底座標 z を [-1/2, 1/2)^n に折り返して返す

    Returns:
        np.ndarray: (N, n)
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, lattice.dimension)
    z = arr @ np.linalg.inv(lattice.scaled_generator)
    return z - np.floor(z + 0.5)


def estimate_entropy_raw(samples, num_bins=DEFAULT_FOLDED_BINS):
    """
    折り返し前の雑音 N の微分エントロピー（データ範囲を等分）

    Returns:
        EntropyEstimate: nats / 次元
    """
    values = _pooled(samples)
    if not np.all(np.isfinite(values)):
        raise ValueError("サンプルに有限でない値が含まれています")
    return _estimate(values, float(values.min()), float(values.max()), num_bins)


def uniform_entropy(lattice):
    """V 上一様分布のエントロピー (1/n)·log volume(V)"""
    return lattice.log_volume_per_dim


@dataclass
class NoiseProfile:
    """実効雑音の統計量（nats / 次元、振幅² / 次元）"""
    folded: np.ndarray = field(repr=False)
    raw: np.ndarray = field(repr=False)
    entropy_folded: EntropyEstimate
    entropy_raw: EntropyEstimate
    mse: float
    mse_standard_error: float
    log_volume_per_dim: float
    rate: float = float('nan')
    rate_raw: float = float('nan')
    rate_clamped: bool = False

    @property
    def histogram(self):
        """折り返し雑音のヒストグラム（entropy_folded.coordinates の座標系、pandas 出力用の列）"""
        est = self.entropy_folded
        return {
            'bin_left': est.edges[:-1],
            'bin_right': est.edges[1:],
            'count': est.counts,
            'density': est.counts / (est.num_samples * np.diff(est.edges)),
        }


def build_noise_profile(noise, lattice, num_bins=DEFAULT_FOLDED_BINS, raw_bins=None):
    """
    雑音サンプルから NoiseProfile を作成しレートも計算する

    Args:
        noise: NoiseSamples
        lattice: Lattice
        num_bins: 折り返し雑音のビン数
        raw_bins: 生の雑音のビン数（省略時は num_bins）

    Returns:
        NoiseProfile
    """
    raw = np.asarray(noise.raw, dtype=float)
    sq = np.sum(raw.reshape(raw.shape[0], -1) ** 2, axis=1) / lattice.dimension
    profile = NoiseProfile(
        folded=noise.folded,
        raw=raw,
        entropy_folded=estimate_entropy_folded(noise.folded, lattice, num_bins),
        entropy_raw=estimate_entropy_raw(raw, raw_bins or num_bins),
        mse=float(np.mean(sq)),
        mse_standard_error=float(np.std(sq, ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else 0.0,
        log_volume_per_dim=lattice.log_volume_per_dim,
    )
    result = achievable_rate(profile, lattice)
    profile.rate = result['rate']
    profile.rate_raw = result['raw_rate']
    profile.rate_clamped = result['clamped']
    return profile


def achievable_rate(profile, lattice):
    """
    一様入力での mod-Λ 加法雑音チャネルのレート

    負の推定値は 0 に切り上げ、clamped フラグを立てる。

    Args:
        profile: NoiseProfile（entropy_folded 計算済み）
        lattice: Lattice

    Returns:
        dict: rate, raw_rate, clamped, uncertainty, log_volume_per_dim, entropy_folded
    """
    if profile.entropy_folded is None:
        raise ValueError("entropy_folded が計算されていません")
    log_vol = lattice.log_volume_per_dim
    raw_rate = log_vol - profile.entropy_folded.entropy
    return {
        'rate': max(raw_rate, 0.0),
        'raw_rate': raw_rate,
        'clamped': raw_rate < 0,
        'uncertainty': profile.entropy_folded.uncertainty,
        'log_volume_per_dim': log_vol,
        'entropy_folded': profile.entropy_folded.entropy,
    }


def nats_to_bits(value):
    return value / math.log(2.0)
