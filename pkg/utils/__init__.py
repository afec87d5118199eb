"""
ユーティリティモジュール

このモジュールには、アプリケーション全体で使用される汎用的なユーティリティ関数やクラスが含まれています。
"""

# バージョン情報
__version__ = "0.1.0"
