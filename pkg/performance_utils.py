# -*- coding: utf-8 -*-
"""
パフォーマンス改善ユーティリティモジュール
"""
import logging
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Callable, Any, Optional, Hashable, List

from config import BATCH_SIZE, CACHE_SIZE, DEFAULT_THREADS

try:
    import psutil
except ImportError:
    psutil = None

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """パフォーマンス監視クラス"""

    def __init__(self):
        self.execution_times = {}
        self._lock = threading.Lock()

    def measure_time(self, func_name: str = None):
        """実行時間を測定するデコレータ"""
        def decorator(func):
            @wraps(func)
            def wrapper(*args, **kwargs):
                name = func_name or func.__name__
                start_time = time.perf_counter()
                try:
                    return func(*args, **kwargs)
                finally:
                    execution_time = time.perf_counter() - start_time
                    with self._lock:
                        self.execution_times[name] = execution_time
                    logger.debug(f"[Performance] {name}: {execution_time:.3f}秒")
            return wrapper
        return decorator

    def get_execution_times(self):
        """実行時間の履歴を取得"""
        with self._lock:
            return self.execution_times.copy()


# モジュール共通のモニタ
monitor = PerformanceMonitor()


class DataCache:
    """スレッドセーフなLRUキャッシュ"""

    def __init__(self, max_size: int = CACHE_SIZE):
        self.cache = OrderedDict()
        self.max_size = max_size
        self._lock = threading.Lock()

    def get(self, key: Hashable) -> Any:
        """キャッシュからデータを取得"""
        with self._lock:
            if key in self.cache:
                self.cache.move_to_end(key)
                return self.cache[key]
        return None

    def set(self, key: Hashable, value: Any):
        """キャッシュにデータを設定"""
        with self._lock:
            self.cache[key] = value
            self.cache.move_to_end(key)
            while len(self.cache) > self.max_size:
                self.cache.popitem(last=False)

    def get_or_create(self, key: Hashable, factory: Callable[[], Any]) -> Any:
        """キーがなければ factory で生成して登録する"""
        value = self.get(key)
        if value is None:
            value = factory()
            self.set(key, value)
        return value

    def clear(self):
        """キャッシュをクリア"""
        with self._lock:
            self.cache.clear()

    def size(self) -> int:
        """キャッシュサイズを取得"""
        with self._lock:
            return len(self.cache)


class BatchProcessor:
    """スレッドプールによるバッチ処理クラス

    結果は常に入力順で返す。
    """

    def __init__(self, batch_size: int = BATCH_SIZE, workers: int = DEFAULT_THREADS):
        self.batch_size = max(1, int(batch_size))
        self.workers = max(1, int(workers))

    def process_in_batches(self, items: list, processor: Callable,
                           progress_callback: Optional[Callable[[int, str], None]] = None,
                           collect_errors: bool = False) -> List[Any]:
        """アイテムをバッチ処理

        Args:
            items: 処理対象のリスト
            processor: 各アイテムに適用する関数
            progress_callback: 進捗通知 (percent, message)
            collect_errors: True の場合、例外を結果として返す（False なら送出する）

        Returns:
            入力順の結果リスト
        """
        items = list(items)
        total_items = len(items)
        results: List[Any] = []

        def run(item):
            try:
                return processor(item)
            except Exception as e:
                if not collect_errors:
                    raise
                logger.warning(f"バッチ処理エラー: {e}")
                return e

        if self.workers == 1:
            executor = None
        else:
            executor = ThreadPoolExecutor(max_workers=self.workers)
        try:
            for i in range(0, total_items, self.batch_size):
                batch = items[i:i + self.batch_size]
                if executor is None:
                    results.extend(run(item) for item in batch)
                else:
                    results.extend(executor.map(run, batch))

                if progress_callback:
                    done = i + len(batch)
                    progress_callback(min(100, int(done / total_items * 100)), f"{done}/{total_items}件処理完了")
        finally:
            if executor is not None:
                executor.shutdown(wait=True)
        return results


def memory_usage_psutil():
    """
    psutilを使って現在のプロセスのメモリ使用量を取得する

    Returns:
        float: メモリ使用量（MB）、psutilがインストールされていない場合は0
    """
    if psutil is None:
        logger.debug("psutilがインストールされていないためメモリ使用量は取得できません")
        return 0.0
    return psutil.Process().memory_info().rss / (1024 * 1024)
