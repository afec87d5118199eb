#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
電力制御シミュレータのコアアプリケーションモジュール
"""

import logging
import time
from pathlib import Path
from typing import Optional, Union

from utils.logger import attach_run_log, detach_run_log

logger = logging.getLogger(__name__)


class PowerControlCore:
    """
    電力制御シミュレータのコアクラス

    出力先の準備と、実行ディレクトリごとの run.log の付け外しを担当する。
    1つのインスタンスで扱う実行は1つだけ。
    """

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.run_dir: Optional[Path] = None
        self._run_log: Optional[logging.Handler] = None
        self._started_at: Optional[float] = None

        if not self.output_dir.exists():
            self.output_dir.mkdir(parents=True)
            logger.info(f"出力ディレクトリを作成しました: {self.output_dir}")

    def startup(self, run_dir: Union[str, Path]) -> None:
        """実行ディレクトリでの処理を開始する"""
        if self._run_log is not None:
            raise RuntimeError(f"実行 {self.run_dir} がまだ終了していません")
        self.run_dir = Path(run_dir)
        self._run_log = attach_run_log(self.run_dir)
        self._started_at = time.perf_counter()
        logger.info(f"実行を開始しました: {self.run_dir}")

    def shutdown(self) -> None:
        """run.log を閉じる（startup 前や2回目の呼び出しでは何もしない）"""
        if self._run_log is None:
            return
        elapsed = time.perf_counter() - (self._started_at or 0.0)
        logger.info(f"実行を終了しました: {self.run_dir} ({elapsed:.2f}秒)")
        detach_run_log(self._run_log)
        self._run_log = None
