"""
乱数サブストリーム生成モジュール

すべての乱数は1つのマスターシードから導出する。
導出規則: SeedSequence([seed, H(label), index])
    - H(label): ラベル文字列の SHA-256 先頭8バイト（符号なし整数）
    - index: バッチ番号・ユーザー番号など

同じ (seed, label, index) からは常に同じ Generator が得られるため、
逐次実行と並列実行で結果がビット単位で一致する。
"""

import hashlib

import numpy as np


def label_hash(label):
    """
    ラベル文字列を64bit整数に変換

    Args:
        label: サブストリームのラベル（例: 'dither/0'）

    Returns:
        int: SHA-256 先頭8バイトの整数値
    """
    digest = hashlib.sha256(label.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


def derive_seed_sequence(seed, label, index=0):
    """(seed, label, index) から SeedSequence を導出"""
    if seed is None:
        raise ValueError("seed は必須です（壁時計によるシードは使用しない）")
    if int(seed) < 0 or int(index) < 0:
        raise ValueError(f"seed と index は非負整数である必要があります: seed={seed}, index={index}")
    return np.random.SeedSequence([int(seed), label_hash(label), int(index)])


def derive_rng(seed, label, index=0):
    """
    (seed, label, index) に対応する独立な乱数ストリームを返す

    Args:
        seed: マスターシード
        label: 用途ラベル ('training', 'messages', 'dither/<i>', 'channel' など)
        index: バッチ番号など

    Returns:
        np.random.Generator
    """
    return np.random.default_rng(derive_seed_sequence(seed, label, index))


def dither_label(user):
    """ユーザー i のディザ用ラベル"""
    return f"dither/{user}"
