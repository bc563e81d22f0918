"""
並列実行モジュール

独立なタスク（試行バッチ・スイープ点）をプロセスプールに分配し、
結果をタスク番号順に並べ直して返す。逐次実行と並列実行で結果は一致する。
"""

import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed


def run_ordered(func, tasks, workers=1, logger=None, verbose=False, label='batch'):
    """
    tasks の各要素に func を適用し、入力順の結果リストを返す

    Args:
        func: モジュールレベルの関数（pickle 可能であること）
        tasks: 引数のリスト
        workers: 並列プロセス数（1 以下なら逐次実行）
        logger: UnifiedLogger（省略可）
        verbose: 進捗表示フラグ
        label: ログ・進捗表示用の名前

    Returns:
        list: func(tasks[i]) の結果（i の昇順）
    """
    tasks = list(tasks)
    total = len(tasks)
    results = [None] * total

    if workers is None or workers <= 1 or total <= 1:
        for i, task in enumerate(tasks):
            results[i] = _call(func, task, i, logger, label)
            _report(i, total, results[i], logger, verbose, label)
        return results

    done = 0
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = {ex.submit(func, task): i for i, task in enumerate(tasks)}
        for f in as_completed(futures):
            i = futures[f]
            try:
                results[i] = f.result()
            except Exception as e:
                if logger is not None:
                    logger.log_exception(label, i, str(e), traceback.format_exc())
                raise
            done += 1
            _report(i, total, results[i], logger, verbose, label, done=done)
    return results


def _call(func, task, index, logger, label):
    try:
        return func(task)
    except Exception as e:
        if logger is not None:
            logger.log_exception(label, index, str(e), traceback.format_exc())
        raise


def _report(index, total, result, logger, verbose, label, done=None):
    done = index + 1 if done is None else done
    if logger is not None:
        data = {'done': f'{done}/{total}'}
        if isinstance(result, dict) and 'count' in result:
            data['trials'] = result['count']
        logger.log_batch_completed(label, index, data)
    if verbose and (done % 10 == 0 or done == total):
        print(f"進捗: {done:,}/{total:,} {label}")
