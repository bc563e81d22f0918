"""
推定器モジュール

チャネル出力 y から入力和 S = Σ x_i を推定する ŝ = g(y) を学習・評価します。
- identity: g(y) = y
- linear: 線形 MMSE g(y) = α·y + β
- binned_conditional_mean: 分位点ビンによる条件付き期待値 E[S | Y = y] の近似

g はスカラー写像で、n 次元出力には座標ごとに適用する。
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import transmit_through
from .lattice import sample_dither
from ..generators.substreams import derive_rng


ESTIMATOR_KINDS = ('identity', 'linear', 'binned_conditional_mean')
MIN_TRAINING_SAMPLES = 10 ** 4
DEFAULT_NUM_BINS = 64
DEFAULT_MIN_COUNT = 100


@dataclass(frozen=True, eq=False)
class Estimator:
    """
    学習済み推定器（学習後は不変）

    binned_conditional_mean の場合:
        g(y) は階段関数ではなく、節点 (centroids, means) を結ぶ区分線形補間。
        学習範囲 [edges[0], edges[-1]] の外では線形推定器を使う。
        edges: 狭義単調増加のビン境界
        means: ビンごとの s の平均（節点の値）
        centroids: ビンごとの y の平均（節点の位置）
        counts: ビンごとの学習点数
        alpha, beta: 学習範囲外で使う線形推定器
    """
    kind: str
    alpha: float = 1.0
    beta: float = 0.0
    edges: np.ndarray = field(default=None)
    means: np.ndarray = field(default=None)
    centroids: np.ndarray = field(default=None)
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"未知の推定器です: {self.kind}")
        if self.kind == 'binned_conditional_mean':
            edges = np.asarray(self.edges, dtype=float)
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise ValueError("ビン境界は狭義単調増加である必要があります")
            num_bins = edges.size - 1
            for key in ('means', 'centroids', 'counts'):
                values = getattr(self, key)
                if values is None or np.asarray(values).shape != (num_bins,):
                    raise ValueError(f"{key} の長さがビン数 {num_bins} と一致しません")
            object.__setattr__(self, 'edges', edges)
            object.__setattr__(self, 'means', np.asarray(self.means, dtype=float))
            object.__setattr__(self, 'centroids', np.asarray(self.centroids, dtype=float))
            object.__setattr__(self, 'counts', np.asarray(self.counts, dtype=int))

    @property
    def num_bins(self):
        return 0 if self.edges is None else self.edges.size - 1

    def apply(self, y):
        """ŝ = g(y) を要素ごとに計算（入力と同じ形状）"""
        y = np.asarray(y, dtype=float)
        if self.kind == 'identity':
            return y.copy()
        linear = self.alpha * y + self.beta
        if self.kind == 'linear':
            return linear
        # 範囲内はビン重心を節点とする区分線形補間、範囲外は線形推定器
        inside = (y >= self.edges[0]) & (y <= self.edges[-1])
        binned = np.interp(y, self.centroids, self.means)
        return np.where(inside, binned, linear)

    def describe(self):
        info = {'kind': self.kind}
        if self.kind != 'identity':
            info['alpha'] = self.alpha
            info['beta'] = self.beta
        if self.kind == 'binned_conditional_mean':
            info['num_bins'] = self.num_bins
            info['min_bin_count'] = int(self.counts.min())
        return info


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """座標ごとに平坦化した (s_j, y_j) の組"""
    s: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if s.shape != y.shape:
            raise ValueError(f"s と y の長さが一致しません: {s.size} != {y.size}")
        object.__setattr__(self, 's', s)
        object.__setattr__(self, 'y', y)

    def __len__(self):
        return self.s.size


def generate_training_set(lattice, channel, pre, num_samples, seed, label='training'):
    """
    ディザ付き一様入力でチャネルを駆動して学習データを生成

    各ユーザーの入力は V 上一様（式 X = v + U mod Λ が誘導する分布）。

    Args:
        lattice: Lattice
        channel: ChannelModel
        pre: Preprocessor
        num_samples: チャネル使用回数（ベクトル数）
        seed: マスターシード
        label: サブストリームのラベル（評価用データは別ラベルにする）

    Returns:
        TrainingSet: 長さ num_samples · n
    """
    rng = derive_rng(seed, label)
    x = np.stack([
        sample_dither(lattice, rng, size=num_samples)
        for _ in range(channel.num_users)
    ])
    y = transmit_through(channel, pre, x, rng)
    return TrainingSet(s=np.sum(x, axis=0), y=y)


def _check_size(train, minimum=MIN_TRAINING_SAMPLES):
    if len(train) < minimum:
        raise ValueError(f"学習データが不足しています: {len(train)} < {minimum}")


def fit_linear_mmse(train):
    """
    線形 MMSE 推定器 α = Cov(S, Y)/Var(Y), β = E[S] - α·E[Y]

    Args:
        train: TrainingSet（10^4 点以上）

    Returns:
        Estimator
    """
    _check_size(train)
    y_mean = float(np.mean(train.y))
    s_mean = float(np.mean(train.s))
    dy = train.y - y_mean
    var_y = float(np.mean(dy ** 2))
    if not var_y > 1e-12 * max(1.0, y_mean ** 2):
        raise ValueError(f"Var(Y) が退化しています（定数出力チャネル）: {var_y}")
    cov = float(np.mean(dy * (train.s - s_mean)))
    alpha = cov / var_y
    return Estimator(kind='linear', alpha=alpha, beta=s_mean - alpha * y_mean)


def _merge_small_bins(counts, min_count):
    """
    点数が min_count 未満のビンを左から貪欲に併合

    Returns:
        list: 併合後の各ビンの開始位置（元ビンのインデックス）
    """
    starts = []
    running = 0
    start = 0
    for i, c in enumerate(counts):
        running += c
        if running >= min_count:
            starts.append(start)
            start = i + 1
            running = 0
    # 右端の残りは直前のビンへ
    return starts or [0]


def fit_binned_conditional_mean(train, num_bins=DEFAULT_NUM_BINS, min_count=DEFAULT_MIN_COUNT):
    """
    分位点ビンによる条件付き期待値推定器

    Args:
        train: TrainingSet
        num_bins: 初期ビン数（16以上）
        min_count: 各ビンの最小点数（不足するビンは隣と併合）

    Returns:
        Estimator
    """
    if num_bins < 16:
        raise ValueError(f"num_bins は16以上である必要があります: {num_bins}")
    _check_size(train)
    if len(train) < 16 * min_count:
        raise ValueError(
            f"ビンあたりの学習点数が不足しています: {len(train)} 点で最小 {min_count} 点/ビン"
        )

    linear = fit_linear_mmse(train)
    y, s = train.y, train.s

    edges = np.unique(np.quantile(y, np.linspace(0.0, 1.0, num_bins + 1)))
    if edges.size < 2:
        raise ValueError("出力が定数のためビンを構成できません")
    index = np.clip(np.searchsorted(edges, y, side='right') - 1, 0, edges.size - 2)
    counts = np.bincount(index, minlength=edges.size - 1)

    starts = _merge_small_bins(counts, min_count)
    merged_edges = np.append(edges[starts], edges[-1])
    index = np.clip(
        np.searchsorted(merged_edges, y, side='right') - 1, 0, merged_edges.size - 2
    )
    num = merged_edges.size - 1
    counts = np.bincount(index, minlength=num)
    if np.any(counts < min_count):
        raise ValueError(f"最小点数 {min_count} を満たさないビンがあります")

    means = np.bincount(index, weights=s, minlength=num) / counts
    centroids = np.bincount(index, weights=y, minlength=num) / counts

    return Estimator(
        kind='binned_conditional_mean',
        alpha=linear.alpha,
        beta=linear.beta,
        edges=merged_edges,
        means=means,
        centroids=centroids,
        counts=counts,
    )


def identity_estimator():
    return Estimator(kind='identity')


def fit_estimator(kind, train, num_bins=DEFAULT_NUM_BINS, min_count=DEFAULT_MIN_COUNT):
    """種類名から推定器を学習"""
    if kind == 'identity':
        return identity_estimator()
    if kind == 'linear':
        return fit_linear_mmse(train)
    if kind == 'binned_conditional_mean':
        return fit_binned_conditional_mean(train, num_bins=num_bins, min_count=min_count)
    raise ValueError(f"未知の推定器です: {kind}")


def evaluate_mse(est, test):
    """
    評価データ上の平均二乗誤差

    Args:
        est: Estimator
        test: TrainingSet（学習データとは別に生成したもの）

    Returns:
        tuple: (mse, standard_error)
    """
    if len(test) < 2:
        raise ValueError("評価データが不足しています")
    sq = (est.apply(test.y) - test.s) ** 2
    mse = float(np.mean(sq))
    se = float(np.std(sq, ddof=1)) / math.sqrt(sq.size)
    return mse, se
