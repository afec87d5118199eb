"""
例外クラス定義

アプリケーション全体で使用される例外クラスをまとめたモジュールです。
CLI 側では PowerControlError を捕捉して終了コードに変換します。
"""

from typing import Optional


class PowerControlError(Exception):
    """本システムの基底例外"""


class ConfigError(PowerControlError):
    """設定値が不正な場合の例外（問題のあるキーを保持する）"""

    def __init__(self, key: str, message: Optional[str] = None):
        self.key = key
        detail = message or "不正な設定値です"
        super().__init__(f"設定エラー [{key}]: {detail}")


class ScenarioError(PowerControlError, ValueError):
    """セル配置・シナリオ構築に関する例外"""


class ShapeError(PowerControlError, ValueError):
    """ネットワークや配列の次元不一致"""


class CodecError(PowerControlError, ValueError):
    """行動（送信電力）のエンコード/デコードに関する例外"""


class ReplayError(PowerControlError):
    """リプレイバッファの操作に関する例外"""


class TrackingError(PowerControlError):
    """環境追従メカニズムに関する例外"""


class TheoremHypothesisError(PowerControlError):
    """トイMDPが前提条件（行動非依存の遷移・即時報酬）を満たさない"""


class CheckpointError(PowerControlError):
    """チェックポイントの読み書きに関する例外"""
