"""
ロギングユーティリティ

アプリケーション全体のロガーと、実行ディレクトリごとのログファイルを扱います。
"""

import logging
import sys
from pathlib import Path
from typing import Union

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
RUN_LOG_FILE = "run.log"


def setup_application_logger(
    level: int = logging.INFO, log_dir: Union[str, Path] = "logs"
) -> logging.Logger:
    """
    アプリケーション全体のロガーをセットアップする

    Args:
        level: ログレベル（--debug 指定時は DEBUG）
        log_dir: ログディレクトリ

    Returns:
        logging.Logger: 設定済みのルートロガー
    """
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger()
    logger.setLevel(level)

    # 既存のハンドラをクリア
    logger.handlers = []

    formatter = logging.Formatter(LOG_FORMAT)

    file_handler = logging.FileHandler(log_dir / "application.log", encoding="utf-8")
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    # numpy / scipy 経由の警告もログに流す
    logging.captureWarnings(True)

    return logger


def attach_run_log(run_dir: Union[str, Path]) -> logging.FileHandler:
    """
    実行ディレクトリに run.log を作り、ルートロガーに追加する

    レベルはルートロガーの現在のレベルに合わせる。
    """
    root = logging.getLogger()
    handler = logging.FileHandler(Path(run_dir) / RUN_LOG_FILE, encoding="utf-8")
    handler.setLevel(root.level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    """attach_run_log で追加したハンドラを外して閉じる"""
    logging.getLogger().removeHandler(handler)
    handler.close()
