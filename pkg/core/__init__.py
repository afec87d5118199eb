"""
コアモジュール

このモジュールには、アプリケーションのコア機能が含まれています。
"""

# バージョン情報
__version__ = "0.1.0"
