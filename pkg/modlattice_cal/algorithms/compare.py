"""
推定器比較モジュール

同じ格子・チャネル・前処理・シードの下で、独立に学習した推定器ごとに
MSE・雑音エントロピー・レートを比較する表を作る。
"""

import math

import pandas as pd

from ..core.estimators import evaluate_mse, fit_estimator, generate_training_set
from ..core.pipeline import TransformConfig, collect_noise, run_trials
from .entropy import DEFAULT_FOLDED_BINS, build_noise_profile


def fit_variants(lattice, channel, pre, kinds, num_training, seed,
                 num_bins=64, min_count=100):
    """
    共通の学習データから推定器ごとの TransformConfig を作成

    Returns:
        list: TransformConfig（kinds の順）
    """
    train = generate_training_set(lattice, channel, pre, num_training, seed)
    return [
        TransformConfig(
            lattice=lattice,
            channel=channel,
            preprocessor=pre,
            estimator=fit_estimator(kind, train, num_bins=num_bins, min_count=min_count),
        )
        for kind in kinds
    ]


def _check_same_setup(variants):
    base = variants[0]
    for cfg in variants[1:]:
        if cfg.lattice.describe() != base.lattice.describe():
            raise ValueError("比較する構成の格子が一致しません")
        if cfg.channel != base.channel:
            raise ValueError("比較する構成のチャネルが一致しません")
        if cfg.preprocessor != base.preprocessor:
            raise ValueError("比較する構成の前処理が一致しません")


def compare_estimators(variants, assignment, num_trials, seed, num_test=None,
                       entropy_bins=DEFAULT_FOLDED_BINS, batch_size=4096, workers=1,
                       dithered=True, logger=None, verbose=False):
    """
    推定器ごとの MSE・エントロピー・レートの比較表

    試行・評価データはすべての推定器で同じ乱数列を使う。

    Args:
        variants: TransformConfig のリスト（格子・チャネル・前処理が共通）
        assignment: MessageAssignment
        num_trials: 試行回数
        seed: マスターシード
        num_test: MSE 評価データの大きさ（省略時は num_trials）
        dithered: False ならディザなしで試行する

    Returns:
        tuple: (pd.DataFrame, dict) 比較表と推定器名 → (records, profile)
    """
    if not variants:
        raise ValueError("比較する構成がありません")
    _check_same_setup(variants)
    base = variants[0]
    test = generate_training_set(
        base.lattice, base.channel, base.preprocessor, num_test or num_trials, seed, label='test'
    )

    rows = []
    details = {}
    for cfg in variants:
        kind = cfg.estimator.kind
        if verbose:
            print(f"\n--- 推定器: {kind} ---")
        mse, mse_se = evaluate_mse(cfg.estimator, test)
        records = run_trials(cfg, assignment, num_trials, seed, batch_size=batch_size,
                             workers=workers, dithered=dithered, verbose=verbose,
                             logger=logger)
        profile = build_noise_profile(collect_noise(records), cfg.lattice, num_bins=entropy_bins)
        ef, er = profile.entropy_folded, profile.entropy_raw
        rows.append({
            'estimator': kind,
            'alpha': cfg.estimator.alpha if kind != 'identity' else math.nan,
            'beta': cfg.estimator.beta if kind != 'identity' else math.nan,
            'mse': mse,
            'mse_se': mse_se,
            'entropy_folded': ef.entropy,
            'entropy_folded_unc': ef.uncertainty,
            'entropy_raw': er.entropy,
            'entropy_raw_unc': er.uncertainty,
            'rate': profile.rate,
            'rate_raw': profile.rate_raw,
            'rate_unc': ef.uncertainty,
            'rate_clamped': profile.rate_clamped,
        })
        details[kind] = (records, profile)
        if logger is not None:
            logger.log_stage(f'compare/{kind}', {'mse': f'{mse:.6g}', 'rate': f'{profile.rate:.6g}'})

    return pd.DataFrame(rows), details


def rate_gap(table, better, worse):
    """
    2つの推定器のレート差（0 への切り上げ前）と合成不確かさ

    Returns:
        tuple: (rate[better] - rate[worse], sqrt(unc_b² + unc_w²))
    """
    indexed = table.set_index('estimator')
    gap = float(indexed.loc[better, 'rate_raw'] - indexed.loc[worse, 'rate_raw'])
    unc = math.hypot(indexed.loc[better, 'rate_unc'], indexed.loc[worse, 'rate_unc'])
    return gap, unc
