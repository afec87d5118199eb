"""
サービスモジュール

このモジュールには、学習・評価・検証・ベンチマークの各サービスが含まれています。
サービスはアプリケーションのビジネスロジックを実装します。
"""

# バージョン情報
__version__ = "0.1.0"

from .benchmark_service import run_benchmark
from .evaluation_service import EvaluationService, run_evaluation
from .savers import RunSaver
from .trainer import Trainer, run_tracking, run_training
from .verification_service import VerificationService, run_verification

__all__ = [
    "Trainer",
    "EvaluationService",
    "VerificationService",
    "RunSaver",
    "run_training",
    "run_tracking",
    "run_evaluation",
    "run_benchmark",
    "run_verification",
]
