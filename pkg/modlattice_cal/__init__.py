"""
modlattice_cal - Generalized mod-Lattice transformation toolkit

任意の K ユーザー多元接続チャネルを、ディザ付き mod-Λ 変換によって
mod-Λ 加法雑音チャネルに変換し、誘導される雑音の統計・達成レート・
推定器による情報損失を数値的に評価する。

Main Components:
    - core: 格子演算、チャネル動物園、推定器、変換パイプライン、離散オラクル
    - algorithms: 雑音エントロピー、レート、独立性検定、推定器比較
    - generators: 乱数サブストリーム、メッセージ割り当て
    - parallel: 並列実行、統合ログ
    - io: YAML 設定、レポート出力
    - cli: run / sweep

Usage:
    from modlattice_cal import lattice_for_power, mod_lattice, sample_dither
"""

__version__ = '1.0.0'
__author__ = 'Research Team'

# Core exports
from .core.lattice import (
    Lattice,
    LatticeStats,
    make_lattice,
    lattice_for_power,
    nearest_point,
    mod_lattice,
    is_in_voronoi,
    sample_dither,
    estimate_second_moment,
    reference_second_moment,
    scale_to_power,
)
from .core.channels import (
    ChannelModel,
    Preprocessor,
    identity_preprocessor,
    transmit_through,
    sum_power,
    build_channel_zoo,
)
from .core.estimators import (
    Estimator,
    TrainingSet,
    generate_training_set,
    fit_linear_mmse,
    fit_binned_conditional_mean,
    fit_estimator,
    identity_estimator,
    evaluate_mse,
)
from .core.pipeline import (
    TransformConfig,
    TrialRecord,
    TrialRecords,
    transmit_user,
    receive,
    run_trials,
    regenerate_dithers,
    check_trial_invariants,
    measure_user_power,
    collect_noise,
)
from .core.discrete import (
    DiscreteSystem,
    exact_noise_distribution,
    simulate_discrete,
    total_variation,
    max_pairwise_tv,
)

# Algorithm exports
from .algorithms.entropy import (
    NoiseProfile,
    estimate_entropy_folded,
    estimate_entropy_raw,
    build_noise_profile,
    achievable_rate,
)
from .algorithms.independence import independence_report
from .algorithms.compare import compare_estimators, fit_variants

# Generator exports
from .generators.substreams import derive_rng
from .generators.messages import MessageAssignment

__all__ = [
    # Core
    'Lattice',
    'LatticeStats',
    'make_lattice',
    'lattice_for_power',
    'nearest_point',
    'mod_lattice',
    'is_in_voronoi',
    'sample_dither',
    'estimate_second_moment',
    'reference_second_moment',
    'scale_to_power',
    'ChannelModel',
    'Preprocessor',
    'identity_preprocessor',
    'transmit_through',
    'sum_power',
    'build_channel_zoo',
    'Estimator',
    'TrainingSet',
    'generate_training_set',
    'fit_linear_mmse',
    'fit_binned_conditional_mean',
    'fit_estimator',
    'identity_estimator',
    'evaluate_mse',
    'TransformConfig',
    'TrialRecord',
    'TrialRecords',
    'transmit_user',
    'receive',
    'run_trials',
    'regenerate_dithers',
    'check_trial_invariants',
    'measure_user_power',
    'collect_noise',
    'DiscreteSystem',
    'exact_noise_distribution',
    'simulate_discrete',
    'total_variation',
    'max_pairwise_tv',
    # Algorithms
    'NoiseProfile',
    'estimate_entropy_folded',
    'estimate_entropy_raw',
    'build_noise_profile',
    'achievable_rate',
    'independence_report',
    'compare_estimators',
    'fit_variants',
    # Generators
    'derive_rng',
    'MessageAssignment',
]
