"""
実験実行モジュール

設定ファイル → 推定器の学習 → 試行 → 解析 → レポート出力 を行う。

    python main.py run configs/awgn_baseline.yaml --seed 1 --out result/awgn
    python main.py sweep configs/awgn_baseline.yaml --param channel.noise_var --values 0.1,0.3,1,3,10
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

from ..algorithms.compare import compare_estimators, fit_variants
from ..algorithms.entropy import nats_to_bits
from ..algorithms.independence import independence_report, two_sample_uniformity
from ..core.channels import ChannelModel, Preprocessor
from ..core.lattice import estimate_second_moment, lattice_for_power, sample_dither
from ..core.pipeline import check_trial_invariants, collect_noise, measure_user_power
from ..generators.messages import MessageAssignment
from ..generators.substreams import derive_rng
from ..io.config import ConfigError, get_config_value, load_config, with_config_value
from ..io.result_writer import (
    TRIAL_DUMP_COLUMNS,
    histogram_table,
    trial_dump_table,
    write_estimator_table,
    write_summary,
    write_table,
)
from ..parallel.logging import UnifiedLogger
from ..parallel.trial_runner import run_ordered


# nats で表す列（--bits で 1/log 2 倍する）
_INFORMATION_COLUMNS = (
    'entropy_folded', 'entropy_folded_unc', 'entropy_raw', 'entropy_raw_unc',
    'rate', 'rate_raw', 'rate_unc',
)


def build_components(config):
    """
    設定から格子・チャネル・前処理・メッセージ割り当てを構築

    Returns:
        tuple: (Lattice, ChannelModel, Preprocessor, MessageAssignment)
    """
    lat_block = config.lattice
    lattice = lattice_for_power(lat_block.kind, lat_block.power, dimension=lat_block.dimension)

    ch = config.channel
    channel = ChannelModel(
        name=ch.name or ch.structure,
        num_users=ch.num_users,
        structure=ch.structure,
        noise_law=ch.noise_law,
        noise_var=ch.noise_var,
        clip_level=ch.clip_level,
        cubic_coeff=ch.cubic_coeff,
        gains=tuple(ch.gains),
    )

    pre = Preprocessor(maps=tuple(
        (m['kind'], {k: v for k, v in m.items() if k != 'kind'})
        for m in config.preprocessor.maps
    ))

    a = config.run.assignment
    assignment = MessageAssignment(
        kind=a.kind,
        messages=tuple(a.messages),
        num_tuples=a.num_tuples,
        grid_points=a.grid_points,
    )
    return lattice, channel, pre, assignment


def _to_units(table, units):
    if units != 'bits':
        return table
    table = table.copy()
    for column in _INFORMATION_COLUMNS:
        if column in table:
            table[column] = table[column].map(nats_to_bits)
    return table


def execute(config, logger=None, verbose=False):
    """
    1つの実験を実行し、レポート用の結果を返す（ファイルは書かない）

    Args:
        config: ExperimentConfig
        logger: UnifiedLogger（省略可）
        verbose: 進捗表示フラグ

    Returns:
        dict: summary, comparison, histogram, records, estimators
    """
    run = config.run
    seed = run.seed
    lattice, channel, pre, assignment = build_components(config)

    if verbose:
        print("=" * 60)
        print(f"実験: {config.name}")
        print(f"格子: {lattice.quantizer_kind} (n={lattice.dimension}, scale={lattice.scale:.6g})")
        print(f"チャネル: {channel.structure} / {channel.noise_law}, K={channel.num_users}")
        print("=" * 60)

    variants = fit_variants(
        lattice, channel, pre, config.estimator.kinds, config.estimator.training_size, seed,
        num_bins=config.estimator.num_bins, min_count=config.estimator.min_count,
    )
    if logger is not None:
        logger.log_stage('fit', {'estimators': ','.join(config.estimator.kinds)})

    stats = estimate_second_moment(
        lattice, config.analysis.second_moment_samples, derive_rng(seed, 'second_moment')
    )

    comparison, details = compare_estimators(
        variants, assignment, run.num_trials, seed,
        entropy_bins=config.analysis.entropy_bins,
        batch_size=run.batch_size,
        workers=run.workers,
        dithered=run.dithered,
        logger=logger,
        verbose=verbose,
    )

    primary_index = config.estimator.kinds.index(config.estimator.primary)
    primary_cfg = variants[primary_index]
    records, profile = details[config.estimator.primary]
    row = comparison.iloc[primary_index]

    invariants = check_trial_invariants(primary_cfg, records)
    power = measure_user_power(records)
    noise = collect_noise(records)

    # 送信信号（ユーザー 0）と純粋なディザの二標本比較
    x0 = records.transmitted[:, 0, :]
    reference = sample_dither(lattice, derive_rng(seed, 'dither_test'), size=x0.shape[0])
    dither_stat, dither_p, dither_ok = two_sample_uniformity(x0, reference, alpha=config.analysis.alpha)

    units = config.output.units
    scale = nats_to_bits if units == 'bits' else (lambda v: v)

    summary = {
        'name': config.name,
        'units': units,
        'lattice_kind': lattice.quantizer_kind,
        'dimension': lattice.dimension,
        'lattice_scale': lattice.scale,
        'volume': lattice.volume,
        'second_moment_reference': stats.reference,
        'second_moment_estimate': stats.second_moment,
        'second_moment_se': stats.standard_error,
        'normalized_second_moment': stats.normalized_second_moment,
        'num_users': channel.num_users,
        'channel': channel.name,
        'structure': channel.structure,
        'noise_law': channel.noise_law,
        'noise_var': channel.noise_var,
        'num_trials': len(records),
        'dithered': run.dithered,
        'primary_estimator': config.estimator.primary,
        'alpha_hat': primary_cfg.estimator.alpha,
        'beta_hat': primary_cfg.estimator.beta,
        'mse': float(row['mse']),
        'mse_se': float(row['mse_se']),
        'trial_mse': profile.mse,
        'trial_mse_se': profile.mse_standard_error,
        'entropy_folded': scale(profile.entropy_folded.entropy),
        'entropy_folded_uncertainty': scale(profile.entropy_folded.uncertainty),
        'entropy_raw': scale(profile.entropy_raw.entropy),
        'entropy_raw_uncertainty': scale(profile.entropy_raw.uncertainty),
        'log_volume_per_dim': scale(profile.log_volume_per_dim),
        'rate': scale(profile.rate),
        'rate_uncertainty': scale(profile.entropy_folded.uncertainty),
        'rate_clamped': profile.rate_clamped,
        'resolution_limited': profile.entropy_folded.resolution_limited,
        'entropy_bins': profile.entropy_folded.num_bins,
        'entropy_coordinates': profile.entropy_folded.coordinates,
        'identity_pass_rate': invariants['identity_pass_rate'],
        'max_identity_error': invariants['max_identity_error'],
        'transmitted_in_voronoi': invariants['transmitted_in_voronoi'],
        'received_in_voronoi': invariants['received_in_voronoi'],
    }
    for i in range(channel.num_users):
        summary[f'user{i}_power'] = float(power['power'][i])
        summary[f'user{i}_power_se'] = float(power['standard_error'][i])

    try:
        report = independence_report(
            noise.groups,
            alpha=config.analysis.alpha,
            pairing=config.analysis.pairing,
            max_pairs=config.analysis.max_pairs,
            min_group_size=config.analysis.min_group_size,
        )
        summary.update(report.as_dict())
    except ValueError as e:
        summary['independence_test'] = 'skipped'
        if logger is not None:
            logger.log('WARN', 'Independence test skipped', {'reason': str(e)})

    summary['dither_uniformity_statistic'] = dither_stat
    summary['dither_uniformity_pvalue'] = dither_p
    summary['dither_uniformity_accepted'] = dither_ok

    if logger is not None:
        logger.log_stage('analysis', {
            'rate': f"{summary['rate']:.6g}",
            'identity_pass_rate': summary['identity_pass_rate'],
        })

    return {
        'summary': summary,
        'comparison': _to_units(comparison, units),
        'histogram': histogram_table(profile),
        'records': records,
        'estimators': [cfg.estimator for cfg in variants],
    }


def _apply_overrides(config, seed=None, bits=None, workers=None):
    if seed is not None:
        config = with_config_value(config, 'run.seed', int(seed))
    if bits:
        config = with_config_value(config, 'output.units', 'bits')
    if workers is not None:
        config = with_config_value(config, 'run.workers', int(workers))
    return config


def run_experiment(config_path, seed=None, out=None, bits=None, workers=None, verbose=False):
    """
    設定ファイルから実験を実行し、レポートを書き出す

    Args:
        config_path: YAML 設定ファイル
        seed: シードの上書き
        out: 出力ディレクトリ（省略時は output.dir、なければ result/<name>）
        bits: True なら bits 単位で報告
        workers: 並列プロセス数の上書き

    Returns:
        dict: execute の結果に 'out_dir' を加えたもの
    """
    config = _apply_overrides(load_config(config_path), seed, bits, workers)
    out_dir = Path(out or config.output.dir or Path('result') / config.name)
    out_dir.mkdir(parents=True, exist_ok=True)

    logger = UnifiedLogger(out_dir / 'execution_log.txt')
    logger.log_session_start(config.name, config.run.seed, config.run.workers)
    try:
        result = execute(config, logger=logger, verbose=verbose)
    except Exception as e:
        logger.log_exception('session', 0, str(e))
        logger.log_session_end({'status': 'error'})
        raise

    write_summary(out_dir / 'summary.txt', config, result['summary'])
    write_table(out_dir / 'comparison.csv', result['comparison'])
    write_table(out_dir / 'histogram.csv', result['histogram'])
    if config.output.trial_dump:
        write_table(out_dir / 'trials.csv', trial_dump_table(result['records']))
    if config.output.estimator_tables:
        for est in result['estimators']:
            write_estimator_table(out_dir / f'estimator_{est.kind}.txt', est)

    logger.log_stage('report', {'out': str(out_dir)})
    logger.log_session_end({'status': 'ok', 'rate': f"{result['summary']['rate']:.6g}"})

    if verbose:
        s = result['summary']
        print(f"\n=== 結果 ({config.name}) ===")
        print(f"α̂ = {s['alpha_hat']:.6f}, MSE = {s['mse']:.6f} ± {s['mse_se']:.6f}")
        print(f"エントロピー (folded) = {s['entropy_folded']:.6f} {s['units']}")
        print(f"レート = {s['rate']:.6f} ± {s['rate_uncertainty']:.6f} {s['units']}")
        print(f"恒等式合格率 = {s['identity_pass_rate']:.4f}")
        print(f"出力先: {out_dir}")

    result['out_dir'] = out_dir
    return result


def _sweep_point(task):
    config, param, value = task
    table = execute(config)['comparison']
    table.insert(0, param, value)
    return table


def parse_values(text):
    """'0.1,0.3,1' → [0.1, 0.3, 1.0]"""
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError('--values', f"数値のリストである必要があります: {text}") from e


def sweep(config_path, param, values, seed=None, out=None, bits=None, workers=None, verbose=False):
    """
    1つのパラメータを変えながら実験を繰り返し、結果を1つの表にまとめる

    すべての点で同じマスターシードを使う（共通乱数）。
    スイープ点は workers 個のプロセスで並列に実行する。

    Args:
        config_path: YAML 設定ファイル
        param: ドット区切りのパラメータパス（例: channel.noise_var）
        values: 値のリスト

    Returns:
        pd.DataFrame: パラメータ値ごとの比較表を縦に連結したもの
    """
    config = _apply_overrides(load_config(config_path), seed, bits, None)
    current = get_config_value(config, param)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(param, f"数値パラメータではありません: {current!r}")
    if not values:
        raise ConfigError('--values', "値が指定されていません")
    cast = int if isinstance(current, int) else float
    points = []
    for v in values:
        if cast is int and float(v) != int(v):
            raise ConfigError(param, f"整数である必要があります: {v}")
        point = with_config_value(config, param, cast(v))
        points.append((with_config_value(point, 'run.workers', 1), param, cast(v)))

    out_dir = Path(out or config.output.dir or Path('result') / f'{config.name}_sweep')
    out_dir.mkdir(parents=True, exist_ok=True)
    logger = UnifiedLogger(out_dir / 'execution_log.txt')
    num_workers = workers if workers is not None else config.run.workers
    logger.log_session_start(f'{config.name} sweep {param}', config.run.seed, num_workers)

    tables = run_ordered(_sweep_point, points, workers=num_workers, logger=logger,
                         verbose=verbose, label='sweep_point')
    combined = pd.concat(tables, ignore_index=True)
    write_table(out_dir / 'sweep.csv', combined)
    logger.log_session_end({'status': 'ok', 'points': len(points)})
    return combined


def build_parser():
    parser = argparse.ArgumentParser(
        prog='modlattice',
        description='mod-Λ 変換による MAC → 加法雑音チャネル変換の実験ツール',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="trials.csv の列順:\n" + TRIAL_DUMP_COLUMNS,
    )
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p):
        p.add_argument('config', help='YAML 設定ファイル')
        p.add_argument('--seed', type=int, default=None, help='マスターシードの上書き')
        p.add_argument('--out', default=None, help='出力ディレクトリ')
        p.add_argument('--bits', action='store_true', help='エントロピー・レートを bits で報告')
        p.add_argument('--workers', type=int, default=None, help='並列プロセス数')
        p.add_argument('--quiet', action='store_true', help='進捗表示を抑制')

    common(sub.add_parser('run', help='1つの実験を実行'))
    p_sweep = sub.add_parser('sweep', help='パラメータスイープ')
    common(p_sweep)
    p_sweep.add_argument('--param', required=True, help='ドット区切りのパラメータパス')
    p_sweep.add_argument('--values', required=True, help='カンマ区切りの値リスト')
    return parser


def main(argv=None):
    """
    CLI エントリポイント

    Returns:
        int: 終了ステータス（0: 成功, 2: 設定・入力エラー）
    """
    args = build_parser().parse_args(argv)
    try:
        if args.command == 'run':
            run_experiment(args.config, seed=args.seed, out=args.out, bits=args.bits,
                           workers=args.workers, verbose=not args.quiet)
        else:
            table = sweep(args.config, args.param, parse_values(args.values), seed=args.seed,
                          out=args.out, bits=args.bits, workers=args.workers,
                          verbose=not args.quiet)
            if not args.quiet:
                print(table.to_string(index=False))
    except ValueError as e:
        print(f"エラー: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("\n中断されました", file=sys.stderr)
        return 130
    return 0
