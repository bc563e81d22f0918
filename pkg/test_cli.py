#!/usr/bin/env python3
"""
設定ファイル・実験実行・スイープのテスト
"""

import math
from pathlib import Path

import pandas as pd
import pytest

from modlattice_cal.cli import main, run_experiment, sweep
from modlattice_cal.io.config import ConfigError, load_config, parse_config, with_config_value
from modlattice_cal.io.result_writer import read_summary
from modlattice_cal.parallel.logging import parse_log_file


CONFIG_DIR = Path(__file__).parent / 'configs'

SMALL_CONFIG = """\
name: small_awgn
lattice:
  kind: scalar
  power: 1.0
channel:
  num_users: 2
  structure: {structure}
  noise_law: gaussian
  noise_var: {noise_var}
  clip_level: {clip_level}
estimator:
  kinds: [linear, binned_conditional_mean]
  primary: linear
  training_size: 50000
run:
  seed: 17
  num_trials: 20000
  batch_size: 4096
  workers: {workers}
  assignment:
    kind: uniform
    num_tuples: 4
analysis:
  entropy_bins: 128
  second_moment_samples: 20000
output:
  trial_dump: {trial_dump}
"""


def _write_config(tmp_path, name='small.yaml', structure='additive_sum', noise_var=1.0,
                  clip_level=1.0, workers=1, trial_dump='false'):
    path = tmp_path / name
    path.write_text(SMALL_CONFIG.format(
        structure=structure, noise_var=noise_var, clip_level=clip_level,
        workers=workers, trial_dump=trial_dump,
    ), encoding='utf-8')
    return path


def test_bundled_configs_parse():
    for name in ('awgn_baseline', 'lemma1_suite', 'clipped_nonlinear', 'e8_awgn'):
        config = load_config(CONFIG_DIR / f'{name}.yaml')
        assert config.name == name
        assert config.run.seed >= 0


def test_awgn_baseline_reports_expected_coefficient(tmp_path):
    run_experiment(CONFIG_DIR / 'awgn_baseline.yaml', out=tmp_path)
    summary = read_summary(tmp_path / 'summary.txt')
    assert 0.647 <= float(summary['alpha_hat']) <= 0.687
    assert float(summary['identity_pass_rate']) == 1.0
    for name in ('comparison.csv', 'histogram.csv', 'estimator_linear.txt', 'execution_log.txt'):
        assert (tmp_path / name).exists()


def test_independence_suite(tmp_path):
    run_experiment(CONFIG_DIR / 'lemma1_suite.yaml', out=tmp_path)
    summary = read_summary(tmp_path / 'summary.txt')
    assert float(summary['identity_pass_rate']) == 1.0
    assert int(summary['independence_num_pairs']) == 100
    assert float(summary['independence_acceptance_fraction']) >= 0.95


def test_serial_and_parallel_reports_match(tmp_path):
    serial = _write_config(tmp_path, 'serial.yaml', workers=1)
    parallel = _write_config(tmp_path, 'parallel.yaml', workers=2)
    run_experiment(serial, out=tmp_path / 'serial')
    run_experiment(parallel, out=tmp_path / 'parallel')
    for name in ('comparison.csv', 'histogram.csv'):
        assert (tmp_path / 'serial' / name).read_bytes() == (tmp_path / 'parallel' / name).read_bytes()


def test_rerun_is_byte_identical(tmp_path):
    path = _write_config(tmp_path)
    run_experiment(path, out=tmp_path / 'a')
    run_experiment(path, out=tmp_path / 'b')
    for name in ('summary.txt', 'comparison.csv', 'histogram.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_bits_units(tmp_path):
    path = _write_config(tmp_path)
    nats = run_experiment(path, out=tmp_path / 'nats')['summary']
    bits = run_experiment(path, out=tmp_path / 'bits', bits=True)['summary']
    assert bits['units'] == 'bits'
    assert bits['entropy_folded'] == pytest.approx(nats['entropy_folded'] / math.log(2))
    assert bits['mse'] == nats['mse']


def test_trial_dump_columns(tmp_path):
    path = _write_config(tmp_path, trial_dump='true')
    run_experiment(path, out=tmp_path / 'dump')
    table = pd.read_csv(tmp_path / 'dump' / 'trials.csv')
    assert list(table.columns) == [
        'trial', 'label',
        'v0_0', 'v1_0', 'u0_0', 'u1_0', 'x0_0', 'x1_0',
        'y_0', 's_hat_0', 'y_prime_0', 'n_eff_0', 'n_fold_0',
    ]
    assert len(table) == 20000


def test_execution_log_records_stages(tmp_path):
    path = _write_config(tmp_path)
    run_experiment(path, out=tmp_path / 'log')
    parsed = parse_log_file(tmp_path / 'log' / 'execution_log.txt')
    assert len(parsed['sessions']) == 1
    session = parsed['sessions'][0]
    stages = session['stages']
    assert stages[0] == 'fit' and stages[-1] == 'report'
    assert session['errors'] == []
    assert session['batches_completed'] == 2 * 5


def test_single_point_sweep_matches_run(tmp_path):
    path = _write_config(tmp_path)
    run_experiment(path, out=tmp_path / 'run')
    table = sweep(path, 'channel.noise_var', [1.0], out=tmp_path / 'sweep')
    swept = pd.read_csv(tmp_path / 'sweep' / 'sweep.csv').drop(columns='channel.noise_var')
    pd.testing.assert_frame_equal(swept, pd.read_csv(tmp_path / 'run' / 'comparison.csv'))
    assert list(table.columns)[0] == 'channel.noise_var'


def test_sweep_points_share_random_numbers(tmp_path):
    path = _write_config(tmp_path)
    table = sweep(path, 'channel.noise_var', [0.5, 0.5], out=tmp_path / 'sweep')
    half = len(table) // 2
    first = table.iloc[:half].reset_index(drop=True)
    second = table.iloc[half:].reset_index(drop=True)
    pd.testing.assert_frame_equal(first, second)


def test_noise_variance_sweep_is_monotone(tmp_path):
    path = _write_config(tmp_path)
    table = sweep(path, 'channel.noise_var', [0.1, 0.3, 1.0, 3.0, 10.0], out=tmp_path / 'sweep', workers=2)
    linear = table[table['estimator'] == 'linear'].reset_index(drop=True)
    assert list(linear['channel.noise_var']) == [0.1, 0.3, 1.0, 3.0, 10.0]
    for i in range(len(linear) - 1):
        unc = math.hypot(linear.loc[i, 'rate_unc'], linear.loc[i + 1, 'rate_unc'])
        assert linear.loc[i + 1, 'rate'] <= linear.loc[i, 'rate'] + unc


def test_clip_level_sweep_gap_shrinks(tmp_path):
    path = _write_config(tmp_path, structure='clipped_sum', noise_var=0.2)
    table = sweep(path, 'channel.clip_level', [1.13, 4.0], out=tmp_path / 'sweep')

    def gap(c):
        rows = table[table['channel.clip_level'] == c].set_index('estimator')
        return rows.loc['binned_conditional_mean', 'rate_raw'] - rows.loc['linear', 'rate_raw']

    assert gap(4.0) < gap(1.13)


def test_sweep_rejects_bad_parameters(tmp_path):
    path = _write_config(tmp_path)
    with pytest.raises(ConfigError):
        sweep(path, 'channel.no_such_key', [1.0], out=tmp_path / 'x')
    with pytest.raises(ConfigError):
        sweep(path, 'lattice.kind', [1.0], out=tmp_path / 'x')
    with pytest.raises(ConfigError):
        sweep(path, 'run.num_trials', [1.5], out=tmp_path / 'x')


def test_missing_lattice_kind_is_reported(tmp_path, capsys):
    path = tmp_path / 'bad.yaml'
    path.write_text("lattice:\n  power: 1.0\nrun:\n  seed: 1\n", encoding='utf-8')
    assert main(['run', str(path), '--out', str(tmp_path / 'out'), '--quiet']) == 2
    assert 'lattice.kind' in capsys.readouterr().err


def test_config_errors():
    with pytest.raises(ConfigError) as info:
        parse_config({'lattice': {'kind': 'scalar'}})
    assert info.value.field == 'run.seed'
    with pytest.raises(ConfigError) as info:
        parse_config({'lattice': {'kind': 'scalar'}, 'run': {'seed': 1}, 'channel': {'colour': 'red'}})
    assert info.value.field == 'channel.colour'
    with pytest.raises(ConfigError):
        parse_config({'lattice': {'kind': 'Leech'}, 'run': {'seed': 1}})
    with pytest.raises(ConfigError):
        parse_config({'lattice': {'kind': 'E8', 'dimension': 4}, 'run': {'seed': 1}})
    with pytest.raises(ConfigError):
        parse_config({'lattice': {'kind': 'scalar'}, 'run': {'seed': 1}, 'experiment': {}})
    with pytest.raises(ConfigError):
        load_config('no/such/file.yaml')


@pytest.mark.parametrize('block,key,value', [
    ('run', 'dithered', 'no'),
    ('run', 'dithered', 'false'),
    ('run', 'dithered', 0),
    ('output', 'trial_dump', 'yes'),
    ('output', 'estimator_tables', 1),
])
def test_flags_must_be_booleans(block, key, value):
    data = {'lattice': {'kind': 'scalar'}, 'run': {'seed': 1}}
    data.setdefault(block, {})[key] = value
    with pytest.raises(ConfigError) as info:
        parse_config(data)
    assert info.value.field == f'{block}.{key}'


def test_flags_accept_booleans():
    config = parse_config({
        'lattice': {'kind': 'scalar'},
        'run': {'seed': 1, 'dithered': False},
        'output': {'trial_dump': True},
    })
    assert config.run.dithered is False
    assert config.output.trial_dump is True


def test_with_config_value_revalidates():
    config = parse_config({'lattice': {'kind': 'scalar'}, 'run': {'seed': 1}})
    updated = with_config_value(config, 'channel.noise_var', 0.5)
    assert updated.channel.noise_var == 0.5
    assert config.channel.noise_var == 1.0
    with pytest.raises(ConfigError):
        with_config_value(config, 'channel.noise_var', -1.0)
