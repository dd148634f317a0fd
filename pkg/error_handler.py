# -*- coding: utf-8 -*-
"""
エラーハンドリング用モジュール
"""
import logging
import traceback
from typing import Callable, Optional

from config import LOG_FILE, LOG_FORMAT, LOG_LEVEL


class ErrorHandler:
    """エラーハンドリングとログ設定を統一するクラス"""

    def __init__(self, status_callback: Optional[Callable[[str], None]] = None,
                 log_file: Optional[str] = LOG_FILE, level: str = LOG_LEVEL):
        """
        Args:
            status_callback: ステータス通知用のコールバック関数
            log_file: ログファイルのパス（None の場合はコンソールのみ）
            level: ログレベル名
        """
        self.status_callback = status_callback
        self.log_file = log_file
        self.level = level
        self.errors = []
        self.setup_logging()

    def setup_logging(self):
        """ログ設定を初期化"""
        handlers = [logging.StreamHandler()]
        if self.log_file:
            handlers.append(logging.FileHandler(self.log_file, encoding='utf-8'))
        logging.basicConfig(
            level=getattr(logging, self.level.upper(), logging.INFO),
            format=LOG_FORMAT,
            handlers=handlers,
        )
        self.logger = logging.getLogger(__name__)

    def handle_exception(self, e: Exception, context: str = "", user_message: str = "") -> dict:
        """
        例外を統一的に処理する

        Args:
            e: 発生した例外
            context: エラーが発生したコンテキスト
            user_message: 利用者に表示するメッセージ

        Returns:
            レポートに書き出せるエラー記録
        """
        error_details = f"{context}: {e}\n{traceback.format_exc()}"
        self.logger.error(error_details)

        display_message = user_message or f"エラーが発生しました: {e}"
        if self.status_callback:
            self.status_callback(display_message)

        record = {
            'kind': 'error',
            'context': context,
            'error_type': type(e).__name__,
            'message': str(e),
        }
        self.errors.append(record)
        return record


class AnalysisError(Exception):
    """解析処理の基底エラー"""
    pass


class DomainError(AnalysisError):
    """指数や領域の定義域外エラー"""
    pass


class ResolutionError(AnalysisError):
    """半径が格子解像度に対して小さすぎるエラー"""

    def __init__(self, message: str, radius: Optional[float] = None):
        super().__init__(message)
        self.radius = radius


class RangeError(AnalysisError):
    """格子範囲外エラー"""
    pass


class ConfigurationError(AnalysisError):
    """設定・パラメータ関連のエラー"""
    pass


class SolverError(AnalysisError):
    """線形ソルバーの収束エラー"""

    def __init__(self, message: str, residual: float = float('nan')):
        super().__init__(f"{message} (残差={residual:.3e})")
        self.residual = residual


class UnsupportedOperationError(AnalysisError):
    """解析的クロージャがない場合など、実行できない操作"""
    pass


class PreconditionError(AnalysisError):
    """事前条件違反"""
    pass


class FieldFileError(AnalysisError):
    """場ファイル関連のエラー"""
    pass
