"""コマンドラインインターフェース"""

from .runner import main, run_experiment, sweep

__all__ = [
    'main',
    'run_experiment',
    'sweep',
]
