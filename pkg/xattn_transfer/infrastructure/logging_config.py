"""ロギング設定モジュール"""

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
import sys

from xattn_transfer.infrastructure.config import settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(*, log_level: str | None = None, log_file: Path | None = None) -> None:
    """ルートロガーにコンソールとローテーションファイルのハンドラーを付ける

    Args:
        log_level: ログレベル。未指定なら settings.log_level
        log_file: ログファイル。未指定なら settings.effective_log_file
    """
    level_str = log_level or settings.log_level
    level = getattr(logging, level_str.upper(), logging.INFO)
    file_path = log_file or settings.effective_log_file

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers.clear()

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    # 標準出力はコマンドの結果に使うのでログは標準エラーへ
    if settings.log_to_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)

    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = RotatingFileHandler(
        file_path,
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=5,
        encoding="utf-8",
    )
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    root_logger.debug("Logging initialized: level=%s, file=%s", level_str.upper(), file_path)
