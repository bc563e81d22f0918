"""
変換パイプラインモジュール

送信側  X_i = v_i + U_i mod Λ
チャネル Y = channel(f_1(X_1), ..., f_K(X_K))
受信側  Y' = g(Y) - Σ U_i mod Λ

により、任意の K ユーザー MAC を mod-Λ 加法雑音チャネル
Y' = Σ v_i + N mod Λ （N = Ŝ - S はメッセージと独立）に変換する。

試行は batch_size ごとのバッチにまとめ、各バッチは
(seed, ラベル, バッチ番号) から導出したサブストリームだけを使う。
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .channels import transmit_through
from .lattice import VORONOI_TOLERANCE, is_in_voronoi, mod_lattice, sample_dither
from ..generators.messages import draw_messages, resolve_message_table
from ..generators.substreams import derive_rng, dither_label
from ..parallel.trial_runner import run_ordered


DEFAULT_BATCH_SIZE = 4096
IDENTITY_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class TransformConfig:
    lattice: object
    channel: object
    preprocessor: object
    estimator: object
    num_users: int = None
    block_dimension: int = None

    def __post_init__(self):
        if self.num_users is None:
            object.__setattr__(self, 'num_users', self.channel.num_users)
        if self.block_dimension is None:
            object.__setattr__(self, 'block_dimension', self.lattice.dimension)
        if self.num_users != self.channel.num_users:
            raise ValueError(
                f"ユーザー数 {self.num_users} がチャネルのユーザー数 {self.channel.num_users} と一致しません"
            )
        if self.preprocessor.num_users != self.num_users:
            raise ValueError(
                f"前処理のユーザー数 {self.preprocessor.num_users} がユーザー数 {self.num_users} と一致しません"
            )
        if self.block_dimension != self.lattice.dimension:
            raise ValueError(
                f"ブロック次元 {self.block_dimension} が格子の次元 {self.lattice.dimension} と一致しません"
            )


@dataclass(frozen=True)
class TrialRecord:
    """1回の試行の記録（配列は (K, n) または (n,)）"""
    messages: np.ndarray
    dithers: np.ndarray
    transmitted: np.ndarray
    output: np.ndarray
    estimate: np.ndarray
    received: np.ndarray
    noise_raw: np.ndarray
    noise_folded: np.ndarray
    label: int


_COLUMNS = (
    'messages', 'dithers', 'transmitted', 'output', 'estimate',
    'received', 'noise_raw', 'noise_folded', 'labels',
)


class TrialRecords(Sequence):
    """
    試行記録の列指向コンテナ

    messages, dithers, transmitted: (T, K, n)
    output, estimate, received, noise_raw, noise_folded: (T, n)
    labels: (T,)
    """

    def __init__(self, messages, dithers, transmitted, output, estimate,
                 received, noise_raw, noise_folded, labels, dithered=True):
        self.messages = messages
        self.dithers = dithers
        self.transmitted = transmitted
        self.output = output
        self.estimate = estimate
        self.received = received
        self.noise_raw = noise_raw
        self.noise_folded = noise_folded
        self.labels = labels
        self.dithered = dithered

    @classmethod
    def concat(cls, batches, dithered=True):
        if not batches:
            raise ValueError("試行記録が空です")
        columns = {key: np.concatenate([b[key] for b in batches]) for key in _COLUMNS}
        return cls(dithered=dithered, **columns)

    def __len__(self):
        return self.labels.shape[0]

    def __getitem__(self, t):
        if isinstance(t, slice):
            return TrialRecords(
                dithered=self.dithered,
                **{key: getattr(self, key)[t] for key in _COLUMNS},
            )
        return TrialRecord(
            messages=self.messages[t],
            dithers=self.dithers[t],
            transmitted=self.transmitted[t],
            output=self.output[t],
            estimate=self.estimate[t],
            received=self.received[t],
            noise_raw=self.noise_raw[t],
            noise_folded=self.noise_folded[t],
            label=int(self.labels[t]),
        )

    @property
    def num_users(self):
        return self.messages.shape[1]

    @property
    def dimension(self):
        return self.output.shape[1]


def _require_voronoi(lat, x, name):
    if not np.all(is_in_voronoi(lat, x)):
        raise ValueError(f"{name} がボロノイ領域 V の外にあります")


def transmit_user(cfg, v, u):
    """
    送信信号 X = v + U mod Λ

    Args:
        cfg: TransformConfig
        v: メッセージ（V 内）
        u: ディザ（V 内）

    Returns:
        np.ndarray: V 内の送信信号
    """
    _require_voronoi(cfg.lattice, v, 'メッセージ v')
    _require_voronoi(cfg.lattice, u, 'ディザ u')
    return mod_lattice(cfg.lattice, np.asarray(v, dtype=float) + np.asarray(u, dtype=float))


def receive(cfg, y, dithers):
    """
    受信側出力 Y' = g(Y) - Σ U_i mod Λ

    Args:
        cfg: TransformConfig
        y: チャネル出力
        dithers: 形状 (K, ...) の送信側と同じディザ

    Returns:
        np.ndarray: V 内の受信信号
    """
    dithers = np.asarray(dithers, dtype=float)
    return mod_lattice(cfg.lattice, cfg.estimator.apply(y) - np.sum(dithers, axis=0))


def regenerate_dithers(lattice, num_users, seed, batch_index, count):
    """
    共有シードからバッチのディザを再生成（送信側・受信側で同一）

    Returns:
        np.ndarray: 形状 (K, count, n)
    """
    return np.stack([
        sample_dither(lattice, derive_rng(seed, dither_label(i), batch_index), size=count)
        for i in range(num_users)
    ])


def _run_batch(task):
    cfg, assignment, table, seed, start, count, batch_index, dithered = task
    lat = cfg.lattice
    K = cfg.num_users

    messages, labels = draw_messages(assignment, table, lat, K, seed, start, count, batch_index)
    v = np.swapaxes(messages, 0, 1)
    if dithered:
        u = regenerate_dithers(lat, K, seed, batch_index, count)
        x = mod_lattice(lat, v + u)
    else:
        u = np.zeros_like(v)
        x = v.copy()

    y = transmit_through(cfg.channel, cfg.preprocessor, x, derive_rng(seed, 'channel', batch_index))
    estimate = cfg.estimator.apply(y)

    # 受信側はディザを受け取らず共有シードから再生成する
    receiver_dithers = regenerate_dithers(lat, K, seed, batch_index, count) if dithered else u
    received = receive(cfg, y, receiver_dithers)

    noise_raw = estimate - np.sum(x, axis=0)
    return {
        'count': count,
        'messages': messages,
        'dithers': np.swapaxes(u, 0, 1),
        'transmitted': np.swapaxes(x, 0, 1),
        'output': y,
        'estimate': estimate,
        'received': received,
        'noise_raw': noise_raw,
        'noise_folded': mod_lattice(lat, noise_raw),
        'labels': np.asarray(labels, dtype=np.int64),
    }


def run_trials(cfg, assignment, num_trials, seed, batch_size=DEFAULT_BATCH_SIZE, workers=1,
               dithered=True, verbose=False, logger=None):
    """
    変換パイプラインを num_trials 回実行

    Args:
        cfg: TransformConfig（推定器は学習済み）
        assignment: MessageAssignment
        num_trials: 試行回数
        seed: マスターシード
        batch_size: バッチあたりの試行数
        workers: 並列プロセス数
        dithered: False ならディザなし（X_i = v_i、独立性の対照実験用）
        verbose: 進捗表示フラグ
        logger: UnifiedLogger（省略可）

    Returns:
        TrialRecords: 試行番号順の記録
    """
    if num_trials < 1:
        raise ValueError(f"num_trials は1以上である必要があります: {num_trials}")
    if batch_size < 1:
        raise ValueError(f"batch_size は1以上である必要があります: {batch_size}")

    table = resolve_message_table(assignment, cfg.lattice, cfg.num_users, seed)
    if table is not None:
        _require_voronoi(cfg.lattice, table.reshape(-1, cfg.lattice.dimension), 'メッセージ v')

    tasks = []
    for batch_index, start in enumerate(range(0, num_trials, batch_size)):
        count = min(batch_size, num_trials - start)
        tasks.append((cfg, assignment, table, seed, start, count, batch_index, dithered))

    if verbose:
        print(f"\n=== 試行実行 ===")
        print(f"試行数: {num_trials:,} ({len(tasks)} バッチ, workers={workers})")

    batches = run_ordered(_run_batch, tasks, workers=workers, logger=logger,
                          verbose=verbose, label='batch')
    return TrialRecords.concat(batches, dithered=dithered)


def check_trial_invariants(cfg, records, tol=IDENTITY_TOLERANCE):
    """
    試行ごとの不変条件を検査

    - 送信信号 x_i ∈ V
    - 受信信号 y' ∈ V
    - y' = Σ v_i + (ŝ - s) mod Λ （座標ごとに tol 以内、独立に再計算）

    Returns:
        dict: 各条件の合格率と恒等式の最大誤差
    """
    lat = cfg.lattice
    n = lat.dimension
    T = len(records)
    tx_ok = is_in_voronoi(lat, records.transmitted.reshape(-1, n), VORONOI_TOLERANCE)
    rx_ok = is_in_voronoi(lat, records.received, VORONOI_TOLERANCE)

    effective = records.estimate - np.sum(records.transmitted, axis=1)
    oracle = mod_lattice(lat, np.sum(records.messages, axis=1) + effective)
    # 境界での折り返しを吸収するため差も mod Λ で比較
    error = np.max(np.abs(mod_lattice(lat, records.received - oracle)), axis=1)
    identity_ok = error <= tol

    return {
        'num_trials': T,
        'transmitted_in_voronoi': float(np.mean(tx_ok.reshape(T, -1).all(axis=1))),
        'received_in_voronoi': float(np.mean(rx_ok)),
        'identity_pass_rate': float(np.mean(identity_ok)),
        'max_identity_error': float(np.max(error)),
    }


def measure_user_power(records):
    """
    ユーザーごとの達成電力 E[‖X_i‖²]/n と標準誤差

    Returns:
        dict: 'power' (K,), 'standard_error' (K,)
    """
    per_trial = np.sum(records.transmitted ** 2, axis=2) / records.dimension
    T = per_trial.shape[0]
    se = np.std(per_trial, axis=0, ddof=1) / np.sqrt(T) if T > 1 else np.zeros(per_trial.shape[1])
    return {'power': per_trial.mean(axis=0), 'standard_error': se}


@dataclass
class NoiseSamples:
    """
    雑音サンプル

    folded: N mod Λ のプール (T, n)
    raw: N = Ŝ - S のプール (T, n)
    groups: ラベル → 折り返し雑音 (T_g, n)
    message_tuples: ラベル → そのグループのメッセージ (K, n)
    """
    folded: np.ndarray
    raw: np.ndarray
    groups: dict
    message_tuples: dict

    @property
    def num_samples(self):
        return self.folded.shape[0]


def collect_noise(records):
    """
    試行記録から雑音サンプルを集める（ラベルごとのグループとプール）

    Args:
        records: TrialRecords（空でないこと）

    Returns:
        NoiseSamples
    """
    if len(records) == 0:
        raise ValueError("試行記録が空です")
    labels = records.labels
    order = np.argsort(labels, kind='stable')
    unique, first = np.unique(labels[order], return_index=True)
    groups = {}
    message_tuples = {}
    for label, chunk in zip(unique, np.split(order, first[1:])):
        groups[int(label)] = records.noise_folded[chunk]
        message_tuples[int(label)] = records.messages[chunk[0]]
    return NoiseSamples(
        folded=records.noise_folded,
        raw=records.noise_raw,
        groups=groups,
        message_tuples=message_tuples,
    )
