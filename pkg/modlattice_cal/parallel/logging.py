"""
Unified Logging Utility for mod-Λ experiments

タイムスタンプ付きで実験の進行（セッション・段階・バッチ・例外）を
1つのログファイルに集約する。レポート表にはタイムスタンプを書かない。
"""

import os
import sys
import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional


class UnifiedLogger:
    """
    スレッドセーフな単一ファイルロガー

    使用例:
        logger = UnifiedLogger('result/awgn_baseline/execution_log.txt')
        logger.log_session_start(name='awgn_baseline', seed=1, workers=4)
        logger.log_stage('fit', {'estimator': 'linear'})
        logger.log_batch_completed('batch', 0, {'trials': 4096})
        logger.log_session_end({'rate': 0.02})
    """

    def __init__(self, log_file_path: str):
        """
        ロガーを初期化

        Args:
            log_file_path: ログファイルのパス
        """
        self.log_file = Path(log_file_path)
        self.log_file.parent.mkdir(parents=True, exist_ok=True)

        self._lock = threading.Lock()
        self.session_info = {}

    def _get_timestamp(self) -> str:
        return datetime.now().strftime('%Y-%m-%d %H:%M:%S')

    def _safe_append(self, log_entry: str):
        with self._lock:
            try:
                with open(self.log_file, 'a', encoding='utf-8') as f:
                    f.write(log_entry + '\n')
            except IOError as e:
                print(f"Error writing to log file: {e}", file=sys.stderr)

    def log(self, level: str, message: str, data: Optional[Dict[str, Any]] = None):
        """
        ログエントリを追記

        Args:
            level: ログレベル ('INFO', 'WARN', 'ERROR', 'PROGRESS')
            message: ログメッセージ
            data: 補足データ（辞書）
        """
        log_entry = f"[{self._get_timestamp()}] {level}: {message}"
        if data:
            log_entry += " | " + " | ".join(f"{k}={v}" for k, v in data.items())
        self._safe_append(log_entry)

    def log_session_start(self, name: str, seed: int, workers: int = 1):
        """
        セッション開始を記録

        Args:
            name: 実験名
            seed: マスターシード
            workers: 並列プロセス数
        """
        self.session_info = {
            'name': name,
            'seed': seed,
            'workers': workers,
            'start_time': datetime.now(),
        }
        header = f"\n{'='*80}\n[{self._get_timestamp()}] SESSION START\n{'='*80}"
        self._safe_append(header)
        self.log('INFO', 'Session initialized', {'name': name, 'seed': seed, 'workers': workers})

    def log_stage(self, stage: str, data: Optional[Dict[str, Any]] = None):
        """処理段階（fit / trials / analysis / report）の完了を記録"""
        self.log('INFO', f'Stage {stage} completed', data)

    def log_batch_completed(self, label: str, index: int, data: Optional[Dict[str, Any]] = None):
        log_data = {'index': index}
        log_data.update(data or {})
        self.log('PROGRESS', f'{label} {index} completed', log_data)

    def log_exception(self, label: str, index: int, exception_msg: str, traceback_str: str = None):
        """
        例外情報を記録

        Args:
            label: タスク種別
            index: タスク番号
            exception_msg: 例外メッセージ
            traceback_str: トレースバック（オプション）
        """
        self.log('ERROR', f'{label} {index} raised exception', {'error': exception_msg})
        if traceback_str:
            self._safe_append(f"  Traceback:\n{traceback_str}")

    def log_session_end(self, summary: Optional[Dict[str, Any]] = None):
        summary = dict(summary or {})
        if 'start_time' in self.session_info:
            elapsed = (datetime.now() - self.session_info['start_time']).total_seconds()
            summary['elapsed_time_sec'] = f"{elapsed:.2f}"
        self.log('INFO', 'Session ended', summary)
        footer = f"{'='*80}\n[{self._get_timestamp()}] SESSION END\n{'='*80}\n"
        self._safe_append(footer)


def _parse_fields(line: str) -> Dict[str, str]:
    fields = {}
    for part in line.split(' | ')[1:]:
        if '=' in part:
            key, value = part.split('=', 1)
            fields[key.strip()] = value.strip()
    return fields


def parse_log_file(log_file_path: str) -> Dict[str, Any]:
    """
    ログファイルを解析してセッション情報を抽出

    Args:
        log_file_path: ログファイルのパス

    Returns:
        {
            'sessions': [{'name': ..., 'seed': ..., 'start_time': ..., 'end_time': ...,
                          'stages': [...], 'batches_completed': ..., 'errors': [...]}, ...],
            'raw_log': ...
        }
    """
    if not os.path.exists(log_file_path):
        return {'error': f'Log file not found: {log_file_path}'}

    with open(log_file_path, 'r', encoding='utf-8') as f:
        lines = f.readlines()

    sessions = []
    current = None
    for line in lines:
        line = line.strip()
        if not line.startswith('['):
            continue
        timestamp = line[1:line.index(']')]
        if 'SESSION START' in line:
            current = {
                'start_time': timestamp,
                'stages': [],
                'batches_completed': 0,
                'errors': [],
            }
            sessions.append(current)
        elif current is None:
            continue
        elif 'Session initialized' in line:
            current.update(_parse_fields(line))
        elif 'PROGRESS:' in line and 'completed' in line:
            current['batches_completed'] += 1
        elif 'Stage ' in line and 'completed' in line:
            current['stages'].append(line.split('Stage ')[1].split(' ')[0])
        elif 'ERROR:' in line:
            current['errors'].append(_parse_fields(line).get('error', 'Unknown error'))
        elif 'Session ended' in line:
            current['summary'] = _parse_fields(line)
        elif 'SESSION END' in line:
            current['end_time'] = timestamp

    return {'sessions': sessions, 'raw_log': log_file_path}
