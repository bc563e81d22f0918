"""
実験設定モジュール

YAML の入れ子ブロック（lattice, channel, preprocessor, estimator, run,
analysis, output）を読み込み、既定値を補ってデータクラスに検証する。
解決済みの設定はすべてのレポートのヘッダーに書き出される。
"""

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..core.channels import NOISE_LAWS, PREPROCESSOR_KINDS, STRUCTURES
from ..core.estimators import ESTIMATOR_KINDS
from ..core.lattice import LATTICE_CATALOG
from ..generators.messages import ASSIGNMENT_KINDS


class ConfigError(ValueError):
    """設定の検証エラー（field: ドット区切りのパス、reason: 理由）"""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


@dataclass
class LatticeBlock:
    kind: str
    power: float = 1.0
    dimension: int = None


@dataclass
class ChannelBlock:
    num_users: int = 2
    structure: str = 'additive_sum'
    noise_law: str = 'gaussian'
    noise_var: float = 1.0
    clip_level: float = 1.0
    cubic_coeff: float = 0.0
    gains: list = field(default_factory=list)
    name: str = None


@dataclass
class PreprocessorBlock:
    # ユーザーごとの {kind: ..., a: ..., b: ..., kappa: ...}
    maps: list = field(default_factory=list)


@dataclass
class EstimatorBlock:
    kinds: list = field(default_factory=lambda: ['linear', 'binned_conditional_mean'])
    primary: str = None
    training_size: int = 200_000
    num_bins: int = 64
    min_count: int = 100


@dataclass
class AssignmentBlock:
    kind: str = 'uniform'
    num_tuples: int = None
    messages: list = field(default_factory=list)
    grid_points: int = 4


@dataclass
class RunBlock:
    seed: int
    num_trials: int = 100_000
    batch_size: int = 4096
    workers: int = 1
    dithered: bool = True
    assignment: AssignmentBlock = field(default_factory=AssignmentBlock)


@dataclass
class AnalysisBlock:
    entropy_bins: int = 256
    alpha: float = 0.01
    pairing: str = 'disjoint'
    max_pairs: int = None
    min_group_size: int = 1000
    second_moment_samples: int = 10 ** 5


@dataclass
class OutputBlock:
    dir: str = None
    units: str = 'nats'
    trial_dump: bool = False
    estimator_tables: bool = True


@dataclass
class ExperimentConfig:
    name: str
    lattice: LatticeBlock
    channel: ChannelBlock
    preprocessor: PreprocessorBlock
    estimator: EstimatorBlock
    run: RunBlock
    analysis: AnalysisBlock
    output: OutputBlock

    def as_dict(self):
        return asdict(self)

    def to_yaml(self):
        return yaml.safe_dump(self.as_dict(), sort_keys=True, allow_unicode=True)


_BLOCKS = ('lattice', 'channel', 'preprocessor', 'estimator', 'run', 'analysis', 'output')


def _block(data, name, cls, required=()):
    raw = data.get(name) or {}
    if not isinstance(raw, dict):
        raise ConfigError(name, "ブロックはキーと値の組である必要があります")
    known = set(cls.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "未知のキーです")
    for key in required:
        if raw.get(key) is None:
            raise ConfigError(f"{name}.{key}", "必須項目がありません")
    return raw


def _number(path, value, kind=float, minimum=None, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"数値である必要があります: {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(path, f"整数である必要があります: {value!r}")
    value = kind(value)
    if minimum is not None:
        if strict and not value > minimum:
            raise ConfigError(path, f"{minimum} より大きい必要があります: {value}")
        if not strict and value < minimum:
            raise ConfigError(path, f"{minimum} 以上である必要があります: {value}")
    return value


def _flag(path, value):
    if not isinstance(value, bool):
        raise ConfigError(path, f"true または false である必要があります: {value!r}")
    return value


def _choice(path, value, choices):
    if value not in choices:
        raise ConfigError(path, f"{value!r} は {', '.join(choices)} のいずれかである必要があります")
    return value


def parse_config(data, name=None):
    """
    辞書から ExperimentConfig を構築して検証

    Args:
        data: yaml.safe_load の結果
        name: 実験名（data['name'] が優先）

    Returns:
        ExperimentConfig
    """
    if not isinstance(data, dict):
        raise ConfigError('<root>', "設定はキーと値の組である必要があります")
    for key in data:
        if key != 'name' and key not in _BLOCKS:
            raise ConfigError(key, "未知のブロックです")

    raw = _block(data, 'lattice', LatticeBlock, required=('kind',))
    lattice = LatticeBlock(
        kind=_choice('lattice.kind', raw['kind'], tuple(LATTICE_CATALOG)),
        power=_number('lattice.power', raw.get('power', 1.0), minimum=0, strict=True),
        dimension=None if raw.get('dimension') is None
        else _number('lattice.dimension', raw['dimension'], int, minimum=1),
    )
    fixed = LATTICE_CATALOG[lattice.kind]['dimension']
    if fixed is not None and lattice.dimension not in (None, fixed):
        raise ConfigError('lattice.dimension', f"{lattice.kind} の次元は {fixed} です")

    raw = _block(data, 'channel', ChannelBlock)
    channel = ChannelBlock(
        num_users=_number('channel.num_users', raw.get('num_users', 2), int, minimum=1),
        structure=_choice('channel.structure', raw.get('structure', 'additive_sum'), STRUCTURES),
        noise_law=_choice('channel.noise_law', raw.get('noise_law', 'gaussian'), NOISE_LAWS),
        noise_var=_number('channel.noise_var', raw.get('noise_var', 1.0), minimum=0),
        clip_level=_number('channel.clip_level', raw.get('clip_level', 1.0), minimum=0, strict=True),
        cubic_coeff=_number('channel.cubic_coeff', raw.get('cubic_coeff', 0.0)),
        gains=[_number(f'channel.gains[{i}]', h) for i, h in enumerate(raw.get('gains') or [])],
        name=raw.get('name'),
    )
    if channel.gains and len(channel.gains) != channel.num_users:
        raise ConfigError('channel.gains', f"長さがユーザー数 {channel.num_users} と一致しません")

    raw = _block(data, 'preprocessor', PreprocessorBlock)
    maps = raw.get('maps') or []
    if len(maps) == 1 and channel.num_users > 1:
        maps = maps * channel.num_users
    if maps and len(maps) != channel.num_users:
        raise ConfigError('preprocessor.maps', f"長さがユーザー数 {channel.num_users} と一致しません")
    resolved_maps = []
    for i, entry in enumerate(maps):
        entry = {'kind': entry} if isinstance(entry, str) else dict(entry)
        _choice(f'preprocessor.maps[{i}].kind', entry.get('kind'), PREPROCESSOR_KINDS)
        for key, value in entry.items():
            if key != 'kind':
                _number(f'preprocessor.maps[{i}].{key}', value)
        resolved_maps.append(entry)
    preprocessor = PreprocessorBlock(
        maps=resolved_maps or [{'kind': 'identity'} for _ in range(channel.num_users)]
    )

    raw = _block(data, 'estimator', EstimatorBlock)
    kinds = raw.get('kinds') or ['linear', 'binned_conditional_mean']
    if isinstance(kinds, str):
        kinds = [kinds]
    for i, kind in enumerate(kinds):
        _choice(f'estimator.kinds[{i}]', kind, ESTIMATOR_KINDS)
    primary = raw.get('primary') or kinds[0]
    if primary not in kinds:
        raise ConfigError('estimator.primary', f"{primary!r} が kinds に含まれていません")
    estimator = EstimatorBlock(
        kinds=list(kinds),
        primary=primary,
        training_size=_number('estimator.training_size', raw.get('training_size', 200_000), int, minimum=10 ** 4),
        num_bins=_number('estimator.num_bins', raw.get('num_bins', 64), int, minimum=16),
        min_count=_number('estimator.min_count', raw.get('min_count', 100), int, minimum=1),
    )

    raw = _block(data, 'run', RunBlock, required=('seed',))
    raw_assignment = raw.get('assignment') or {}
    if not isinstance(raw_assignment, dict):
        raise ConfigError('run.assignment', "キーと値の組である必要があります")
    for key in raw_assignment:
        if key not in AssignmentBlock.__dataclass_fields__:
            raise ConfigError(f'run.assignment.{key}', "未知のキーです")
    assignment = AssignmentBlock(
        kind=_choice('run.assignment.kind', raw_assignment.get('kind', 'uniform'), ASSIGNMENT_KINDS),
        num_tuples=None if raw_assignment.get('num_tuples') is None
        else _number('run.assignment.num_tuples', raw_assignment['num_tuples'], int, minimum=1),
        messages=list(raw_assignment.get('messages') or []),
        grid_points=_number('run.assignment.grid_points', raw_assignment.get('grid_points', 4), int, minimum=1),
    )
    if assignment.kind == 'fixed' and not assignment.messages:
        raise ConfigError('run.assignment.messages', "fixed 割り当てにはメッセージが必要です")
    run = RunBlock(
        seed=_number('run.seed', raw['seed'], int, minimum=0),
        num_trials=_number('run.num_trials', raw.get('num_trials', 100_000), int, minimum=1),
        batch_size=_number('run.batch_size', raw.get('batch_size', 4096), int, minimum=1),
        workers=_number('run.workers', raw.get('workers', 1), int, minimum=1),
        dithered=_flag('run.dithered', raw.get('dithered', True)),
        assignment=assignment,
    )

    raw = _block(data, 'analysis', AnalysisBlock)
    analysis = AnalysisBlock(
        entropy_bins=_number('analysis.entropy_bins', raw.get('entropy_bins', 256), int, minimum=2),
        alpha=_number('analysis.alpha', raw.get('alpha', 0.01), minimum=0, strict=True),
        pairing=_choice('analysis.pairing', raw.get('pairing', 'disjoint'), ('all', 'disjoint')),
        max_pairs=None if raw.get('max_pairs') is None
        else _number('analysis.max_pairs', raw['max_pairs'], int, minimum=1),
        min_group_size=_number('analysis.min_group_size', raw.get('min_group_size', 1000), int, minimum=2),
        second_moment_samples=_number(
            'analysis.second_moment_samples', raw.get('second_moment_samples', 10 ** 5), int, minimum=10 ** 4
        ),
    )
    if run.num_trials < 2 * analysis.entropy_bins:
        raise ConfigError(
            'run.num_trials',
            f"ビン数 {analysis.entropy_bins} に対してサンプルが不足しています: {run.num_trials}",
        )

    raw = _block(data, 'output', OutputBlock)
    output = OutputBlock(
        dir=raw.get('dir'),
        units=_choice('output.units', raw.get('units', 'nats'), ('nats', 'bits')),
        trial_dump=_flag('output.trial_dump', raw.get('trial_dump', False)),
        estimator_tables=_flag('output.estimator_tables', raw.get('estimator_tables', True)),
    )

    return ExperimentConfig(
        name=str(data.get('name') or name or 'experiment'),
        lattice=lattice,
        channel=channel,
        preprocessor=preprocessor,
        estimator=estimator,
        run=run,
        analysis=analysis,
        output=output,
    )


def load_config(path):
    """
    YAML ファイルから設定を読み込む

    Args:
        path: 設定ファイルのパス

    Returns:
        ExperimentConfig
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError('<file>', f"設定ファイルが見つかりません: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError('<file>', f"YAML の解析に失敗しました: {e}") from e
    return parse_config(data or {}, name=path.stem)


def get_config_value(config, path):
    """ドット区切りのパスで設定値を取得（例: 'channel.noise_var'）"""
    node = config.as_dict() if isinstance(config, ExperimentConfig) else config
    for part in path.split('.'):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(path, "未知のパラメータです")
        node = node[part]
    return node


def with_config_value(config, path, value):
    """
    1つの値を置き換えた新しい設定を返す（再検証つき）

    Returns:
        ExperimentConfig
    """
    data = copy.deepcopy(config.as_dict())
    get_config_value(data, path)
    node = data
    parts = path.split('.')
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value
    return parse_config(data)
