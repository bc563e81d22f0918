"""
メッセージ割り当てモジュール

各試行で送る (v_1, ..., v_K) ∈ V^K の選び方を定める。
    fixed   : 与えられたタプルのリストを順番に使う
    uniform : V 上一様（num_tuples 指定時は G 個を一度だけ引いて巡回）
    grid    : 基本平行体上の m^n 格子点を V に折り返した点から作るタプル

試行 t のグループラベルはタプル番号（fresh uniform では試行番号）。
"""

import itertools
from dataclasses import dataclass

import numpy as np

from ..core.lattice import mod_lattice, sample_dither
from .substreams import derive_rng


ASSIGNMENT_KINDS = ('fixed', 'uniform', 'grid')


@dataclass(frozen=True)
class MessageAssignment:
    kind: str = 'uniform'
    messages: tuple = ()
    num_tuples: int = None
    grid_points: int = 4

    def __post_init__(self):
        if self.kind not in ASSIGNMENT_KINDS:
            raise ValueError(f"未知のメッセージ割り当てです: {self.kind}")
        if self.kind == 'fixed' and len(self.messages) == 0:
            raise ValueError("fixed 割り当てにはメッセージのリストが必要です")
        if self.num_tuples is not None and self.num_tuples < 1:
            raise ValueError(f"num_tuples は1以上である必要があります: {self.num_tuples}")
        if self.grid_points < 1:
            raise ValueError(f"grid_points は1以上である必要があります: {self.grid_points}")

    def describe(self):
        info = {'kind': self.kind}
        if self.kind == 'fixed':
            info['num_tuples'] = len(self.messages)
        elif self.kind == 'uniform' and self.num_tuples is not None:
            info['num_tuples'] = self.num_tuples
        elif self.kind == 'grid':
            info['grid_points'] = self.grid_points
        return info


def grid_messages(lattice, grid_points):
    """
    基本平行体上の格子点 (j / m)·G を V に折り返す

    Returns:
        np.ndarray: 形状 (m^n, n)
    """
    n = lattice.dimension
    coeffs = np.array(
        list(itertools.product(range(grid_points), repeat=n)), dtype=float
    ) / grid_points
    return mod_lattice(lattice, coeffs @ lattice.scaled_generator)


def fixed_message_table(lattice, num_users, messages):
    """fixed 割り当てのタプル表 (G, K, n)"""
    table = np.asarray(messages, dtype=float)
    n = lattice.dimension
    if table.ndim == 2 and n == 1:
        table = table[:, :, None]
    if table.ndim != 3 or table.shape[1:] != (num_users, n):
        raise ValueError(
            f"メッセージの形状 {table.shape} が (タプル数, K={num_users}, n={n}) と一致しません"
        )
    return table


def resolve_message_table(assignment, lattice, num_users, seed):
    """
    試行で巡回するタプル表を返す（fresh uniform の場合は None）

    Returns:
        np.ndarray or None: 形状 (G, K, n)
    """
    if assignment.kind == 'fixed':
        return fixed_message_table(lattice, num_users, assignment.messages)
    if assignment.kind == 'grid':
        points = grid_messages(lattice, assignment.grid_points)
        count = points.shape[0]
        # タプル j = (p_j, p_{j+1}, ..., p_{j+K-1})
        index = (np.arange(count)[:, None] + np.arange(num_users)[None, :]) % count
        return points[index]
    if assignment.num_tuples is None:
        return None
    rng = derive_rng(seed, 'messages', 0)
    samples = sample_dither(lattice, rng, size=assignment.num_tuples * num_users)
    return samples.reshape(assignment.num_tuples, num_users, lattice.dimension)


def draw_messages(assignment, table, lattice, num_users, seed, start, count, batch_index):
    """
    試行 start, ..., start+count-1 のメッセージとラベル

    Returns:
        tuple: (messages (count, K, n), labels (count,))
    """
    trials = start + np.arange(count)
    if table is not None:
        groups = trials % table.shape[0]
        return table[groups], groups
    rng = derive_rng(seed, 'messages', batch_index)
    samples = sample_dither(lattice, rng, size=count * num_users)
    return samples.reshape(count, num_users, lattice.dimension), trials
