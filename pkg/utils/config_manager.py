import configparser
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from utils.errors import ConfigError

CONFIG_FILE_NAME = "config.ini"  # 設定ファイル名


class ConfigManager:
    """
    config.ini ファイルを読み込み、設定値へのアクセスを提供するクラス。

    path を省略するとアプリケーションの config/config.ini を使用する。
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, required: bool = False):
        self._logger = logging.getLogger(__name__)
        self._config = configparser.ConfigParser()
        self.config_path = Path(path) if path is not None else self._default_config_path()
        self.loaded = self._load_config(required)

    def _load_config(self, required: bool) -> bool:
        """設定ファイルを読み込む"""
        if not self.config_path.exists():
            if required:
                raise FileNotFoundError(f"設定ファイルが見つかりません: {self.config_path}")
            self._logger.warning(f"設定ファイルが見つかりません: {self.config_path}")
            return False

        try:
            self._logger.info(f"設定ファイルを読み込みます: {self.config_path}")
            self._config.read(self.config_path, encoding="utf-8")
            return True
        except configparser.Error as e:
            raise ConfigError("config", f"設定ファイルの読み込み中にエラーが発生しました: {e}") from e

    @staticmethod
    def _default_config_path() -> Path:
        """設定ファイルの絶対パスを取得"""
        # アプリケーションのルートディレクトリ (utils フォルダの親)
        app_root_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        return Path(app_root_dir) / "config" / CONFIG_FILE_NAME

    # --- 設定値取得メソッド ---

    def has_value(self, section: str, key: str) -> bool:
        return self._config.has_option(section, key)

    def get_value(
        self, section: str, key: str, fallback: Optional[Any] = None
    ) -> Optional[str]:
        """指定されたセクションとキーの値を取得 (文字列)"""
        return self._config.get(section, key, fallback=fallback)

    def get_boolean(self, section: str, key: str, fallback: bool = False) -> bool:
        """指定されたセクションとキーの値をブール値として取得"""
        try:
            # getboolean は 'yes', 'true', '1', 'on' などを True として解釈
            return self._config.getboolean(section, key, fallback=fallback)
        except ValueError:
            raise ConfigError(
                f"{section}.{key}", f"ブール値として解釈できません: {self.get_value(section, key)}"
            )

    def get_int(
        self, section: str, key: str, fallback: Optional[int] = None
    ) -> Optional[int]:
        """指定されたセクションとキーの値を整数として取得"""
        try:
            return self._config.getint(section, key, fallback=fallback)
        except ValueError:
            raise ConfigError(
                f"{section}.{key}", f"整数として解釈できません: {self.get_value(section, key)}"
            )

    def get_float(
        self, section: str, key: str, fallback: Optional[float] = None
    ) -> Optional[float]:
        """指定されたセクションとキーの値を浮動小数点数として取得"""
        try:
            return self._config.getfloat(section, key, fallback=fallback)
        except ValueError:
            raise ConfigError(
                f"{section}.{key}",
                f"浮動小数点数として解釈できません: {self.get_value(section, key)}",
            )

    # --- 設定値の更新 ---

    def set_value(self, section: str, key: str, value: Any):
        """設定値を更新 (メモリ上)"""
        if not self._config.has_section(section):
            self._config.add_section(section)
        self._config.set(section, key, str(value))  # 値は文字列として保存
        self._logger.debug(f"設定値を更新しました: [{section}] {key} = {value}")

    def apply_overrides(self, overrides: Mapping[str, Any]) -> None:
        """
        "section.key" 形式の上書き値をまとめて反映する

        Raises:
            ConfigError: キーが "section.key" 形式でない場合
        """
        for dotted, value in overrides.items():
            section, sep, key = dotted.partition(".")
            if not sep or not section or not key:
                raise ConfigError(dotted, "上書きキーは section.key 形式で指定してください")
            self.set_value(section, key, value)

    def as_dict(self) -> Dict[str, Dict[str, str]]:
        return {s: dict(self._config.items(s)) for s in self._config.sections()}

    def save_config(self, path: Optional[Union[str, Path]] = None) -> bool:
        """現在の設定をファイルに保存"""
        target = Path(path) if path is not None else self.config_path
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8") as configfile:
                self._config.write(configfile)
            self._logger.info(f"設定をファイルに保存しました: {target}")
            return True
        except IOError as e:
            self._logger.error(
                f"設定ファイルの保存中にエラーが発生しました: {e}", exc_info=True
            )
            return False


_managers: Dict[Path, ConfigManager] = {}


def get_config_manager(path: Optional[Union[str, Path]] = None) -> ConfigManager:
    """パスごとに共有される ConfigManager を取得"""
    resolved = Path(path) if path is not None else ConfigManager._default_config_path()
    if resolved not in _managers:
        _managers[resolved] = ConfigManager(resolved)
    return _managers[resolved]
