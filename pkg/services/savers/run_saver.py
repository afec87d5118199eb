"""
実行結果のセーバー

学習ログ CSV、評価表 CSV、ベンチマーク CSV、サマリー／マニフェスト JSON、
エージェントのチェックポイントを1つの実行ディレクトリにまとめて保存します。
"""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import pandas as pd

from models.run_models import CSV_SCHEMA_VERSION, EpisodeLog, RunManifest
from services.agents import PowerAgent
from utils.errors import CheckpointError

MANIFEST_FILE = "manifest.json"


class RunSaver:
    """
    1回の実行の成果物を保存するクラス

    保存したファイルはすべて manifest の paths に登録される。
    """

    def __init__(
        self,
        output_dir: Union[str, Path],
        manifest: RunManifest,
        logger: Optional[logging.Logger] = None,
    ):
        """
        初期化

        Args:
            output_dir: 出力のルートディレクトリ
            manifest: この実行のマニフェスト
            logger: ロガー
        """
        self.manifest = manifest
        self.logger = logger or logging.getLogger(__name__)
        self.run_dir = Path(output_dir) / f"{manifest.command}-{manifest.run_id}"
        self.run_dir.mkdir(parents=True, exist_ok=True)

    def _register(self, name: str, path: Path) -> Path:
        self.manifest.add_path(name, path)
        self.logger.info(f"{name} を保存しました: {path}")
        return path

    def save_frame(self, name: str, frame: pd.DataFrame, filename: Optional[str] = None) -> Path:
        """DataFrame を CSV で保存する（schema_version 列がなければ先頭に追加）"""
        if "schema_version" not in frame.columns:
            frame = frame.copy()
            frame.insert(0, "schema_version", CSV_SCHEMA_VERSION)
        path = self.run_dir / (filename or f"{name}.csv")
        frame.to_csv(path, index=False, encoding="utf-8")
        return self._register(name, path)

    def save_episode_log(self, log: EpisodeLog) -> Path:
        """スロット単位の学習ログ"""
        return self.save_frame("episode_log", log.to_frame())

    def save_evaluation(self, frame: pd.DataFrame) -> Path:
        return self.save_frame("evaluation", frame)

    def save_latency(self, frame: pd.DataFrame) -> Path:
        return self.save_frame("latency", frame)

    def save_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.run_dir / f"{name}.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2, default=_json_default)
        return self._register(name, path)

    def save_summary(self, summary: Dict[str, Any]) -> Path:
        self.manifest.summary.update(summary)
        return self.save_json("summary", {"run_id": self.manifest.run_id, **summary})

    def save_checkpoint(self, agent: PowerAgent, episode: Optional[int] = None) -> Path:
        """
        エージェントのチェックポイントを保存する

        episode を指定すると途中経過として別名で保存する。
        """
        name = "checkpoint" if episode is None else f"checkpoint_ep{episode:06d}"
        path = self.run_dir / f"{name}.json"
        try:
            agent.save(path)
        except OSError as e:
            raise CheckpointError(f"チェックポイントを書き込めません: {path} ({e})") from e
        return self._register(name, path)

    def checkpoint_callback(self) -> Callable[[PowerAgent, int], None]:
        """Trainer に渡す定期チェックポイント用コールバック"""

        def callback(agent: PowerAgent, episode: int) -> None:
            self.save_checkpoint(agent, episode)

        return callback

    def save_manifest(self) -> Path:
        path = self.run_dir / MANIFEST_FILE
        self.manifest.add_path("manifest", path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.manifest.to_dict(), f, ensure_ascii=False, indent=2, default=_json_default)
        self.logger.info(f"マニフェストを保存しました: {path}")
        return path


def load_manifest(path: Union[str, Path]) -> RunManifest:
    """保存済みマニフェストを読み込む"""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    if not path.exists():
        raise FileNotFoundError(f"マニフェストが見つかりません: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return RunManifest(
        command=data["command"],
        seed=int(data["seed"]),
        config=data["config"],
        run_id=data["run_id"],
        created_at=data["created_at"],
        paths=data.get("paths", {}),
        timing=data.get("timing", {}),
        summary=data.get("summary", {}),
    )


def _json_default(value: Any) -> Any:
    # numpy のスカラー・配列
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "item"):
        return value.item()
    return str(value)
