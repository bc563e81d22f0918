"""
雑音の入力独立性検定モジュール

メッセージタプルごとにグループ化した折り返し雑音について、
グループ対ごとに二標本検定を行い、有意水準 alpha での受理率を報告する。
    スカラー: 二標本 Kolmogorov–Smirnov 検定
    ベクトル: 共通の分位点積ビン上のカイ二乗分割表検定
              （n ≤ 2 は座標そのもの、n > 2 は全座標を使う2本の射影）
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2_contingency, ks_2samp


MIN_GROUP_SIZE = 10 ** 3
DEFAULT_ALPHA = 0.01
BINS_PER_AXIS = 6


@dataclass
class IndependenceReport:
    test: str
    alpha: float
    num_groups: int
    num_pairs: int
    accepted: int
    acceptance_fraction: float
    worst_statistic: float
    worst_pvalue: float
    worst_pair: tuple
    binning: str = 'none'

    def as_dict(self, prefix='independence_'):
        return {
            f'{prefix}test': self.test,
            f'{prefix}binning': self.binning,
            f'{prefix}alpha': self.alpha,
            f'{prefix}num_groups': self.num_groups,
            f'{prefix}num_pairs': self.num_pairs,
            f'{prefix}acceptance_fraction': self.acceptance_fraction,
            f'{prefix}worst_statistic': self.worst_statistic,
            f'{prefix}worst_pvalue': self.worst_pvalue,
        }


def _as_matrix(samples):
    arr = np.asarray(samples, dtype=float)
    return arr.reshape(arr.shape[0], -1)


def _projection_axes(dimension):
    """
    n > 2 のときの2本の射影軸（全座標を使う）

        w1 = (1, 1, ..., 1) / √n
        w2 = (1, -1, 1, -1, ...) / √n
    """
    w1 = np.ones(dimension)
    w2 = np.where(np.arange(dimension) % 2 == 0, 1.0, -1.0)
    return np.stack([w1, w2], axis=1) / np.sqrt(dimension)


def _binning_view(groups):
    """カイ二乗検定に使う2次元以下の表現と、その名前"""
    dimension = groups[0].shape[1]
    if dimension <= 2:
        return groups, 'coordinates'
    axes = _projection_axes(dimension)
    return [g @ axes for g in groups], 'projections'


def _shared_bin_index(groups, bins_per_axis):
    """全グループをプールした分位点で座標ごとにビン分けし、積ビン番号を返す"""
    pooled = np.concatenate(groups)
    dims = pooled.shape[1]
    edges = [
        np.unique(np.quantile(pooled[:, j], np.linspace(0, 1, bins_per_axis + 1))[1:-1])
        for j in range(dims)
    ]
    sizes = [e.size + 1 for e in edges]
    indices = []
    for g in groups:
        index = np.zeros(g.shape[0], dtype=np.int64)
        for j in range(dims):
            index = index * sizes[j] + np.searchsorted(edges[j], g[:, j], side='right')
        indices.append(index)
    return indices, int(np.prod(sizes))


def _pairs(keys, pairing, max_pairs, rng):
    if pairing == 'all':
        pairs = list(itertools.combinations(range(len(keys)), 2))
    elif pairing == 'disjoint':
        pairs = [(i, i + 1) for i in range(0, len(keys) - 1, 2)]
    else:
        raise ValueError(f"未知のペアリングです: {pairing} ('all' または 'disjoint')")
    if max_pairs is not None and len(pairs) > max_pairs:
        if rng is not None:
            chosen = np.sort(rng.choice(len(pairs), size=max_pairs, replace=False))
            pairs = [pairs[i] for i in chosen]
        else:
            pairs = pairs[:max_pairs]
    return pairs


def independence_report(groups, alpha=DEFAULT_ALPHA, pairing='all', max_pairs=None,
                        rng=None, min_group_size=MIN_GROUP_SIZE, bins_per_axis=BINS_PER_AXIS):
    """
    グループ間の二標本検定による独立性の要約

    Args:
        groups: ラベル → 雑音サンプル (T_g,) または (T_g, n) の辞書
        alpha: 有意水準
        pairing: 'all'（全組）または 'disjoint'（互いに素な組、受理数が二項分布になる）
        max_pairs: 検定する組数の上限
        rng: max_pairs の抽出に使う Generator（省略時は先頭から）
        min_group_size: 検定に使うグループの最小サンプル数

    Returns:
        IndependenceReport
    """
    keys = sorted(k for k, g in groups.items() if len(g) >= min_group_size)
    if len(keys) < 2:
        raise ValueError(
            f"サンプル数 {min_group_size} 以上のグループが2つ以上必要です（該当: {len(keys)}）"
        )
    data = [_as_matrix(groups[k]) for k in keys]
    vector = data[0].shape[1] > 1
    if vector:
        view, binning = _binning_view(data)
        indices, num_cells = _shared_bin_index(view, bins_per_axis)

    accepted = 0
    worst = (-np.inf, 1.0, None)
    pairs = _pairs(keys, pairing, max_pairs, rng)
    for i, j in pairs:
        if vector:
            table = np.stack([
                np.bincount(indices[i], minlength=num_cells),
                np.bincount(indices[j], minlength=num_cells),
            ])
            table = table[:, table.sum(axis=0) > 0]
            if table.shape[1] < 2:
                statistic, pvalue = 0.0, 1.0
            else:
                statistic, pvalue, _, _ = chi2_contingency(table)
        else:
            result = ks_2samp(data[i][:, 0], data[j][:, 0])
            statistic, pvalue = result.statistic, result.pvalue
        if pvalue >= alpha:
            accepted += 1
        if statistic > worst[0]:
            worst = (float(statistic), float(pvalue), (keys[i], keys[j]))

    return IndependenceReport(
        test='chi2' if vector else 'ks',
        alpha=alpha,
        num_groups=len(keys),
        num_pairs=len(pairs),
        accepted=accepted,
        acceptance_fraction=accepted / len(pairs) if pairs else float('nan'),
        worst_statistic=worst[0],
        worst_pvalue=worst[1],
        worst_pair=worst[2],
        binning=binning if vector else 'none',
    )


def two_sample_uniformity(samples, reference, alpha=DEFAULT_ALPHA, bins_per_axis=BINS_PER_AXIS):
    """
    2つのサンプル集合の分布の一致を検定（送信信号とディザの比較など）

    Returns:
        tuple: (statistic, pvalue, accepted)
    """
    report = independence_report(
        {0: samples, 1: reference},
        alpha=alpha,
        min_group_size=1,
        bins_per_axis=bins_per_axis,
    )
    return report.worst_statistic, report.worst_pvalue, report.acceptance_fraction == 1.0
