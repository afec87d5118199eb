"""
データモデルを定義するモジュール

このモジュールには、アプリケーションで使用されるデータモデルクラスが含まれています。
"""

# バージョン情報
__version__ = "0.1.0"
