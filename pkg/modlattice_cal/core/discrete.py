"""
離散オラクルモジュール

Z_q 上の有限モデルで変換を厳密に再現する。
ディザ U_i は Z_q 上一様、mod Λ は mod q に置き換わる。
雑音 δ = (g(y) - Σ u_i - Σ v_i) mod q の分布は全数列挙で厳密に計算でき、
メッセージによらないことを確認できる。
"""

import itertools
from dataclasses import dataclass

import numpy as np


MIN_MODULUS = 5
MAX_MODULUS = 64
PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """
    q: 法（5 ≤ q ≤ 64）
    num_users: K
    table: 条件付き確率表 p(y | x_1, ..., x_K)、形状 (q,)*K + (|Y|,)
    estimator: 出力 y → Z_q の写像、長さ |Y| の整数配列
    """
    q: int
    num_users: int
    table: np.ndarray
    estimator: np.ndarray
    name: str = 'discrete'

    def __post_init__(self):
        if not MIN_MODULUS <= self.q <= MAX_MODULUS:
            raise ValueError(f"q は {MIN_MODULUS} 以上 {MAX_MODULUS} 以下である必要があります: {self.q}")
        if self.num_users < 1:
            raise ValueError(f"num_users は1以上である必要があります: {self.num_users}")
        table = np.asarray(self.table, dtype=float)
        if table.ndim != self.num_users + 1 or table.shape[:-1] != (self.q,) * self.num_users:
            raise ValueError(f"確率表の形状 {table.shape} が (q,)*K + (|Y|,) ではありません")
        if np.any(table < 0) or np.max(np.abs(table.sum(axis=-1) - 1.0)) > PROBABILITY_TOLERANCE:
            raise ValueError("各条件付き分布の和が1ではありません")
        estimator = np.asarray(self.estimator, dtype=np.int64)
        if estimator.shape != (table.shape[-1],):
            raise ValueError(f"推定器の長さ {estimator.shape} が出力アルファベットの大きさ {table.shape[-1]} と一致しません")
        if np.any(estimator < 0) or np.any(estimator >= self.q):
            raise ValueError("推定器の値は Z_q に含まれる必要があります")
        object.__setattr__(self, 'table', table)
        object.__setattr__(self, 'estimator', estimator)

    @property
    def num_outputs(self):
        return self.table.shape[-1]


def _check_messages(sys, messages):
    v = np.asarray(messages, dtype=np.int64).reshape(-1)
    if v.size != sys.num_users:
        raise ValueError(f"メッセージ数 {v.size} がユーザー数 {sys.num_users} と一致しません")
    return v % sys.q


def _all_tuples(q, K):
    return np.array(list(itertools.product(range(q), repeat=K)), dtype=np.int64).reshape(-1, K)


def exact_noise_distribution(sys, messages):
    """
    δ の分布をディザとチャネル出力の全数列挙で計算

    Args:
        sys: DiscreteSystem
        messages: (v_1, ..., v_K) ∈ Z_q^K

    Returns:
        np.ndarray: 長さ q の確率ベクトル
    """
    v = _check_messages(sys, messages)
    q, K = sys.q, sys.num_users
    u = _all_tuples(q, K)
    x = (u + v[None, :]) % q
    probs = sys.table[tuple(x.T)] / float(q ** K)
    delta = (sys.estimator[None, :] - u.sum(axis=1)[:, None] - v.sum()) % q
    return np.bincount(delta.ravel(), weights=probs.ravel(), minlength=q)


def simulate_discrete(sys, messages, num_trials, rng):
    """
    δ の分布のモンテカルロ推定

    Args:
        sys: DiscreteSystem
        messages: (v_1, ..., v_K)
        num_trials: 試行回数（10^4 以上）
        rng: np.random.Generator

    Returns:
        np.ndarray: 長さ q の経験分布
    """
    if num_trials < 10 ** 4:
        raise ValueError(f"num_trials は 10^4 以上である必要があります: {num_trials}")
    v = _check_messages(sys, messages)
    q, K = sys.q, sys.num_users
    u = rng.integers(0, q, size=(num_trials, K))
    x = (u + v[None, :]) % q
    cdf = np.cumsum(sys.table[tuple(x.T)], axis=1)
    r = rng.random(num_trials)
    y = np.minimum(np.sum(r[:, None] >= cdf, axis=1), sys.num_outputs - 1)
    delta = (sys.estimator[y] - u.sum(axis=1) - v.sum()) % q
    return np.bincount(delta, minlength=q) / num_trials


def total_variation(p, r):
    """全変動距離 ½·Σ|p - r|"""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if p.shape != r.shape:
        raise ValueError(f"分布の長さが一致しません: {p.shape} != {r.shape}")
    return 0.5 * float(np.sum(np.abs(p - r)))


def max_pairwise_tv(sys, max_tuples=None):
    """
    全メッセージタプル間の δ 分布の最大全変動距離

    Args:
        sys: DiscreteSystem
        max_tuples: 調べるタプル数の上限（先頭から）

    Returns:
        float
    """
    tuples = _all_tuples(sys.q, sys.num_users)
    if max_tuples is not None:
        tuples = tuples[:max_tuples]
    laws = np.array([exact_noise_distribution(sys, v) for v in tuples])
    return 0.5 * float(np.max(np.sum(np.abs(laws[:, None, :] - laws[None, :, :]), axis=2)))


# ============================================================================
# 代表的な離散システム
# ============================================================================

def modular_adder_system(q, num_users=2, flip_prob=0.1):
    """
    y = (Σ x_i + e) mod q、e = ±1 をそれぞれ確率 flip_prob、推定器は恒等写像
    """
    if not 0 <= flip_prob <= 0.5:
        raise ValueError(f"flip_prob は [0, 0.5] の範囲である必要があります: {flip_prob}")
    x = _all_tuples(q, num_users)
    s = x.sum(axis=1) % q
    table = np.zeros((x.shape[0], q))
    rows = np.arange(x.shape[0])
    np.add.at(table, (rows, s), 1.0 - 2.0 * flip_prob)
    np.add.at(table, (rows, (s + 1) % q), flip_prob)
    np.add.at(table, (rows, (s - 1) % q), flip_prob)
    return DiscreteSystem(
        q=q,
        num_users=num_users,
        table=table.reshape((q,) * num_users + (q,)),
        estimator=np.arange(q),
        name=f'modular_adder_q{q}',
    )


def clipped_adder_system(q, num_users=2, clip=None, flip_prob=0.1):
    """
    非モジュラー加算器 y = clamp(Σ x_i + e, 0, c)、推定器 g(y) = y mod q
    """
    clip = (q - 1) if clip is None else int(clip)
    if clip < 1:
        raise ValueError(f"clip は1以上である必要があります: {clip}")
    x = _all_tuples(q, num_users)
    s = x.sum(axis=1)
    table = np.zeros((x.shape[0], clip + 1))
    rows = np.arange(x.shape[0])
    for e, p in ((-1, flip_prob), (0, 1.0 - 2.0 * flip_prob), (1, flip_prob)):
        np.add.at(table, (rows, np.clip(s + e, 0, clip)), p)
    return DiscreteSystem(
        q=q,
        num_users=num_users,
        table=table.reshape((q,) * num_users + (clip + 1,)),
        estimator=np.arange(clip + 1) % q,
        name=f'clipped_adder_q{q}',
    )


def random_system(q, num_users, num_outputs, rng):
    """Dirichlet 分布から引いた確率表とランダムな推定器"""
    table = rng.dirichlet(np.ones(num_outputs), size=q ** num_users)
    table /= table.sum(axis=1, keepdims=True)
    return DiscreteSystem(
        q=q,
        num_users=num_users,
        table=table.reshape((q,) * num_users + (num_outputs,)),
        estimator=rng.integers(0, q, size=num_outputs),
        name=f'random_q{q}',
    )
