"""
実行結果保存用クラスのパッケージ
"""

from .run_saver import RunSaver, load_manifest

__all__ = ["RunSaver", "load_manifest"]
