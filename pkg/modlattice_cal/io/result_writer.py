"""
結果出力モジュール

- summary.txt: 解決済み設定（YAML）をヘッダーに持つ key = value 形式のレポート
- *.csv: pandas によるカンマ区切りの表（ヘッダー行つき、UTF-8）
- trials.csv: 試行ごとの生データ（列順は TRIAL_DUMP_COLUMNS の説明を参照）
- estimator_<kind>.txt: 学習済み推定器の表

表とレポートにはタイムスタンプを書かない（同じ設定・シードならバイト単位で一致）。
"""

import math
from pathlib import Path

import numpy as np
import pandas as pd

from ..core.estimators import Estimator


FLOAT_FORMAT = '%.10g'

TRIAL_DUMP_COLUMNS = """\
trial, label,
v<i>_<j>, u<i>_<j>, x<i>_<j>  (ユーザー i = 0..K-1, 座標 j = 0..n-1),
y_<j>, s_hat_<j>, y_prime_<j>, n_eff_<j>, n_fold_<j>  (座標 j = 0..n-1)"""


def _format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    if isinstance(value, (list, tuple, np.ndarray)):
        return '[' + ', '.join(_format_value(v) for v in value) + ']'
    return str(value)


def write_summary(path, config, summary):
    """
    key = value 形式のサマリーを書き出す

    Args:
        path: 出力パス
        config: ExperimentConfig（解決済み設定をヘッダーに書く）
        summary: 出力する値の辞書（順序を保つ）
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write("# mod-Lattice transformation experiment summary\n")
        f.write("# resolved config:\n")
        for line in config.to_yaml().splitlines():
            f.write(f"#   {line}\n")
        f.write("#" + "=" * 59 + "\n")
        for key, value in summary.items():
            f.write(f"{key} = {_format_value(value)}\n")
    return path


def read_summary(path):
    """サマリーを辞書（値は文字列）として読み込む"""
    values = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if line.startswith('#') or '=' not in line:
                continue
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


def write_table(path, table):
    """pandas.DataFrame を CSV に書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def histogram_table(profile):
    """折り返し雑音のヒストグラム表"""
    return pd.DataFrame(profile.histogram)


def trial_dump_table(records):
    """
    試行記録を1試行1行の表にする

    Returns:
        pd.DataFrame: 列順は TRIAL_DUMP_COLUMNS
    """
    T, K, n = records.messages.shape
    columns = {'trial': np.arange(T), 'label': records.labels}
    for prefix, values in (('v', records.messages), ('u', records.dithers), ('x', records.transmitted)):
        for i in range(K):
            for j in range(n):
                columns[f'{prefix}{i}_{j}'] = values[:, i, j]
    for prefix, values in (
        ('y', records.output),
        ('s_hat', records.estimate),
        ('y_prime', records.received),
        ('n_eff', records.noise_raw),
        ('n_fold', records.noise_folded),
    ):
        for j in range(n):
            columns[f'{prefix}_{j}'] = values[:, j]
    return pd.DataFrame(columns)


def write_estimator_table(path, est):
    """
    推定器を表形式で書き出す

    1行目: # kind=... alpha=... beta=... [interpolation=piecewise_linear]
    binned の g(y) は (y_centroid, s_mean) を節点とする区分線形補間で、範囲外は alpha·y + beta。
    以降: bin_left, bin_right, count, y_centroid, s_mean（binned の場合のみ行がある）
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if est.kind == 'binned_conditional_mean':
        table = pd.DataFrame({
            'bin_left': est.edges[:-1],
            'bin_right': est.edges[1:],
            'count': est.counts,
            'y_centroid': est.centroids,
            's_mean': est.means,
        })
    else:
        table = pd.DataFrame(columns=['bin_left', 'bin_right', 'count', 'y_centroid', 's_mean'])
    with open(path, 'w', encoding='utf-8') as f:
        header = f"# kind={est.kind} alpha={est.alpha!r} beta={est.beta!r}"
        if est.kind == 'binned_conditional_mean':
            header += " interpolation=piecewise_linear"
        f.write(header + "\n")
        table.to_csv(f, index=False, float_format='%.17g')
    return path


def read_estimator_table(path):
    """
    write_estimator_table の出力から推定器を復元

    Returns:
        Estimator
    """
    with open(path, 'r', encoding='utf-8') as f:
        header = f.readline()
        if not header.startswith('# '):
            raise ValueError(f"推定器ファイルのヘッダーが不正です: {path}")
        params = dict(item.split('=', 1) for item in header[2:].split())
        table = pd.read_csv(f)
    kind = params.get('kind')
    alpha = float(params.get('alpha', 'nan'))
    beta = float(params.get('beta', 'nan'))
    if kind != 'binned_conditional_mean':
        if kind == 'identity':
            return Estimator(kind='identity')
        if math.isnan(alpha) or math.isnan(beta):
            raise ValueError(f"線形推定器の係数がありません: {path}")
        return Estimator(kind=kind, alpha=alpha, beta=beta)
    if params.get('interpolation', 'piecewise_linear') != 'piecewise_linear':
        raise ValueError(f"未対応の補間方式です: {params['interpolation']}")
    edges = np.append(table['bin_left'].to_numpy(), table['bin_right'].to_numpy()[-1])
    return Estimator(
        kind=kind,
        alpha=alpha,
        beta=beta,
        edges=edges,
        means=table['s_mean'].to_numpy(),
        centroids=table['y_centroid'].to_numpy(),
        counts=table['count'].to_numpy(),
    )
