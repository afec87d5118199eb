#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
下りリンク電力制御シミュレータ用CLIツール
DRL Power Allocation CLI - 学習、評価スイープ、実行時間計測、検証を行うコマンドラインツール
"""

import argparse
import logging
import sys
import time
from dataclasses import fields
from typing import Dict, List, Optional, Sequence

from config.config import TrainConfig, config_key, load_train_config
from core.application import PowerControlCore
from models.run_models import RunManifest
from services.agents import load_agent
from services.benchmark_service import DEFAULT_CELL_COUNTS, latency_ratio, reports_frame, run_benchmark
from services.evaluation_service import EvaluationService
from services.savers import RunSaver
from services.trainer import run_tracking, run_training
from services.verification_service import run_verification
from utils.config_manager import ConfigManager
from utils.errors import ConfigError, PowerControlError
from utils.logger import RUN_LOG_FILE, setup_application_logger

# 学習サマリーで平均を取る末尾エピソード数
FINAL_EPISODES = 1000


class PowerControlCLI:
    """電力制御シミュレータCLIツールのメインクラス"""

    def __init__(self, argv: Optional[Sequence[str]] = None):
        """初期化"""
        self.argv = argv
        self.logger = logging.getLogger(__name__)
        self.core: Optional[PowerControlCore] = None

    def run(self) -> int:
        """CLIツールのメイン実行関数（終了コードを返す）"""
        parser = self._create_parser()
        args = parser.parse_args(self.argv)

        if not hasattr(args, "func"):
            parser.print_help()
            return 1

        level = logging.DEBUG if getattr(args, "debug", False) else logging.INFO
        self.logger = setup_application_logger(level=level)
        if level == logging.DEBUG:
            self.logger.info("デバッグモードが有効になりました")

        try:
            return args.func(args)
        except KeyboardInterrupt:
            self.logger.info("処理が中断されました")
            return 130
        except ConfigError as e:
            self.logger.error(str(e))
            return 2
        except FileNotFoundError as e:
            self.logger.error(f"ファイルが見つかりません: {e}")
            return 2
        except PowerControlError as e:
            self.logger.error(f"処理中にエラーが発生しました: {e}")
            return 1
        except Exception as e:
            self.logger.error(f"予期しないエラーが発生しました: {e}", exc_info=True)
            return 1
        finally:
            if self.core is not None:
                self.core.shutdown()

    # --- パーサー ---

    def _create_parser(self) -> argparse.ArgumentParser:
        """コマンドライン引数パーサーの作成"""
        parser = argparse.ArgumentParser(
            prog="drl-power-cli",
            description="セルラー下りリンク電力制御（深層強化学習）シミュレータ",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=(
                "\n使用例:\n"
                "  # DDPG (f2 特徴量) を既定設定で学習\n"
                "  python main.py train --agent ddpg --feature f2\n\n"
                "  # 学習済みエージェントとベースラインをドップラー周波数でスイープ評価\n"
                "  python main.py eval --checkpoint output/train-xxxx/checkpoint.json --sweep doppler --baselines max_power random\n\n"
                "  # 1判断あたりの実行時間を計測\n"
                "  python main.py bench --checkpoint output/train-xxxx/checkpoint.json\n\n"
                "  # 勾配・Jakes 相関などの検証\n"
                "  python main.py verify\n\n"
                "  # 設定確認\n"
                "  python main.py config --show\n\n"
                "  詳細なドキュメントは docs/CLI_USAGE.md を参照してください。\n"
            ),
        )

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", type=str, help="設定ファイルのパス（省略時は config/config.ini）")
        common.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="設定値の上書き（複数指定可能）",
        )
        common.add_argument("--seed", type=int, help="乱数シード")
        common.add_argument("--out", type=str, help="出力ディレクトリ（既定: $DRLPA_OUTPUT_DIR または output/）")
        common.add_argument("--debug", action="store_true", help="デバッグモード")

        method = argparse.ArgumentParser(add_help=False)
        method.add_argument(
            "--agent",
            type=str,
            choices=["reinforce", "dql", "ddpg", "max_power", "random"],
            help="エージェントまたはベースライン",
        )
        method.add_argument("--feature", type=str, choices=["f1", "f2"], help="特徴量の種類")
        method.add_argument("--levels", type=int, help="離散行動の段階数 |A|")
        method.add_argument("--episodes", type=int, help="エピソード数 N_e")
        method.add_argument("--slots", type=int, help="エピソードあたりのスロット数 T")

        subparsers = parser.add_subparsers(
            title="利用可能なコマンド",
            description="以下のコマンドが利用できます",
            dest="command",
            help="実行するコマンドを選択してください",
        )

        self._add_train_parser(subparsers, [common, method])
        self._add_eval_parser(subparsers, [common, method])
        self._add_bench_parser(subparsers, [common, method])
        self._add_track_parser(subparsers, [common, method])
        self._add_verify_parser(subparsers, [common])
        self._add_config_parser(subparsers, [common, method])

        return parser

    def _add_train_parser(self, subparsers, parents):
        train_parser = subparsers.add_parser(
            "train", parents=parents, help="エージェントを学習", description="エージェントを学習します"
        )
        train_parser.set_defaults(func=self.cmd_train)

    def _add_eval_parser(self, subparsers, parents):
        """evalコマンドのパーサーを追加"""
        eval_parser = subparsers.add_parser(
            "eval",
            parents=parents,
            help="分散実行で評価",
            description="学習済みエージェントとベースラインを同一シナリオ群で評価します",
        )
        eval_parser.add_argument("--checkpoint", type=str, help="評価するエージェントのチェックポイント")
        eval_parser.add_argument(
            "--baselines",
            type=str,
            nargs="+",
            default=[],
            choices=["max_power", "random"],
            help="比較するベースライン（複数指定可能）",
        )
        eval_parser.add_argument(
            "--sweep",
            type=str,
            choices=["cell_range", "user_density", "doppler", "levels"],
            help="スイープする項目（省略時は既定設定の1点）",
        )
        eval_parser.add_argument("--values", type=float, nargs="+", help="スイープ値（省略時は既定値）")
        eval_parser.add_argument(
            "--train-episodes", type=int, help="levels スイープで段階数ごとに学習するエピソード数"
        )
        eval_parser.add_argument("--scenarios", type=int, help="評価シナリオ数")
        eval_parser.add_argument("--workers", type=int, help="並列ワーカー数")
        eval_parser.set_defaults(func=self.cmd_eval)

    def _add_bench_parser(self, subparsers, parents):
        bench_parser = subparsers.add_parser(
            "bench",
            parents=parents,
            help="1判断あたりの実行時間を計測",
            description="特徴量抽出と順伝播1回の所要時間をセル数ごとに計測します",
        )
        bench_parser.add_argument("--checkpoint", type=str, help="計測するエージェントのチェックポイント")
        bench_parser.add_argument("--repeats", type=int, help="計測回数（推奨 10000 以上）")
        bench_parser.add_argument(
            "--cells", type=int, nargs="+", help=f"セル数（既定: {' '.join(map(str, DEFAULT_CELL_COUNTS))}）"
        )
        bench_parser.set_defaults(func=self.cmd_bench)

    def _add_track_parser(self, subparsers, parents):
        track_parser = subparsers.add_parser(
            "track",
            parents=parents,
            help="環境追従の運用ループ",
            description="学習済みエージェントを運用し、正規化損失が閾値を超えたときだけ再学習します",
        )
        track_parser.add_argument("--checkpoint", type=str, required=True, help="運用するエージェント")
        track_parser.add_argument(
            "--reshadow-every", type=int, default=0, help="指定スロットごとにシャドウイングを引き直す"
        )
        track_parser.set_defaults(func=self.cmd_track)

    def _add_verify_parser(self, subparsers, parents):
        verify_parser = subparsers.add_parser(
            "verify",
            parents=parents,
            help="数値検証を実行",
            description="勾配・Jakes 相関・単段報酬分解・報酬比例関係・定数を検証します",
        )
        verify_parser.set_defaults(func=self.cmd_verify)

    def _add_config_parser(self, subparsers, parents):
        """configコマンドのパーサーを追加"""
        config_parser = subparsers.add_parser(
            "config", parents=parents, help="設定管理", description="有効な設定の確認・保存を行います"
        )
        config_parser.add_argument("--show", action="store_true", help="現在の設定を表示")
        config_parser.add_argument("--save", type=str, metavar="PATH", help="有効な設定を INI で保存")
        config_parser.set_defaults(func=self.cmd_config)

    # --- 設定 ---

    @staticmethod
    def _parse_overrides(items: List[str]) -> Dict[str, str]:
        overrides = {}
        for item in items:
            if "=" not in item:
                raise ConfigError(item, "--set は section.key=value 形式で指定してください")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        return overrides

    def _load_config(self, args) -> TrainConfig:
        """設定ファイル → --set → CLI フラグの順に適用した設定"""
        config = load_train_config(args.config, self._parse_overrides(args.overrides), self.logger)
        return config.with_overrides(
            seed=args.seed,
            output_dir=getattr(args, "out", None),
            agent=getattr(args, "agent", None),
            feature_kind=getattr(args, "feature", None),
            n_levels=getattr(args, "levels", None),
            n_episodes=getattr(args, "episodes", None),
            slots_per_episode=getattr(args, "slots", None),
            eval_scenarios=getattr(args, "scenarios", None),
            eval_workers=getattr(args, "workers", None),
            bench_repeats=getattr(args, "repeats", None),
        )

    def _open_run(self, command: str, config: TrainConfig) -> RunSaver:
        self.core = PowerControlCore(config.resolved_output_dir)
        manifest = RunManifest(command=command, seed=config.seed, config=config.to_dict())
        saver = RunSaver(self.core.output_dir, manifest, self.logger)
        self.core.startup(saver.run_dir)
        manifest.add_path("run_log", saver.run_dir / RUN_LOG_FILE)
        return saver

    def _load_checkpoint(self, path: Optional[str]):
        if not path:
            return None
        agent = load_agent(path, self.logger)
        self.logger.info(f"エージェントを読み込みました: {agent.kind}-{agent.feature_kind} ({path})")
        return agent

    # --- コマンド ---

    def cmd_train(self, args) -> int:
        """trainコマンドの実行"""
        config = self._load_config(args)
        if config.is_baseline:
            raise ConfigError("agent.kind", f"ベースライン {config.agent} は学習できません")
        saver = self._open_run("train", config)

        started = time.perf_counter()
        agent, log = run_training(
            config, self.logger, checkpoint_callback=saver.checkpoint_callback()
        )
        elapsed = time.perf_counter() - started

        saver.manifest.timing["train_sec"] = elapsed
        saver.save_episode_log(log)
        saver.save_checkpoint(agent)
        last = min(FINAL_EPISODES, config.n_episodes)
        summary = {
            "agent": agent.kind,
            "feature": agent.feature_kind,
            "episodes": config.n_episodes,
            "final_episodes": last,
            "final_mean_sum_rate_per_ap": log.final_mean(last),
            "n_transitions": log.n_transitions,
            "aborted_updates": log.aborted_updates,
            "aborted_episodes": len(log.aborted_episodes),
        }
        saver.save_summary(summary)
        saver.save_manifest()

        print("\n=== 学習結果 ===")
        print(f"最後の{last}エピソードの AP 平均合計レート: {summary['final_mean_sum_rate_per_ap']:.4f} bit/s/Hz")
        print(f"処理時間: {elapsed:.2f}秒")
        print(f"出力先: {saver.run_dir}")
        return 0

    def cmd_eval(self, args) -> int:
        """evalコマンドの実行"""
        config = self._load_config(args)
        service = EvaluationService(config, self.logger)
        baselines = list(dict.fromkeys(args.baselines))

        started = time.perf_counter()
        if args.sweep == "levels":
            if not args.train_episodes:
                raise ConfigError("evaluation.train_episodes", "levels スイープには --train-episodes が必要です")
            values = [int(v) for v in args.values] if args.values else None
            saver = self._open_run("eval", config)
            frame = service.run_levels_sweep(args.train_episodes, values, baselines)
        else:
            sources: list = []
            agent = self._load_checkpoint(args.checkpoint)
            if agent is not None:
                sources.append(agent)
            if config.is_baseline and config.agent not in baselines:
                sources.append(config.agent)
            sources.extend(baselines)
            if not sources:
                raise ConfigError(
                    "agent.kind", "評価する方式がありません（--checkpoint または --agent max_power/random を指定）"
                )
            saver = self._open_run("eval", config)
            frame = service.run(sources, args.sweep, args.values)
        elapsed = time.perf_counter() - started

        saver.manifest.timing["eval_sec"] = elapsed
        if args.checkpoint:
            saver.manifest.add_path("checkpoint_in", args.checkpoint)
        saver.save_evaluation(frame)
        saver.save_manifest()

        print("\n=== 評価結果 ===")
        print(frame.to_string(index=False))
        return 0

    def cmd_bench(self, args) -> int:
        """benchコマンドの実行"""
        config = self._load_config(args)
        source = self._load_checkpoint(args.checkpoint)
        if source is None:
            if not config.is_baseline:
                raise ConfigError("agent.kind", "--checkpoint または --agent max_power/random を指定してください")
            source = config.agent

        saver = self._open_run("bench", config)
        reports = run_benchmark(
            source, config, cell_counts=args.cells or DEFAULT_CELL_COUNTS, logger=self.logger
        )
        frame = reports_frame(reports)
        saver.save_latency(frame)
        summary = {"methods": sorted(set(frame["method"]))}
        if len(reports) > 1:
            summary["latency_ratio"] = latency_ratio(reports)
        saver.save_summary(summary)
        saver.save_manifest()

        print("\n=== 実行時間 ===")
        print(frame.to_string(index=False))
        if "latency_ratio" in summary:
            print(f"最大/最小セル数の平均時間比: {summary['latency_ratio']:.3f}")
        return 0

    def cmd_track(self, args) -> int:
        """trackコマンドの実行"""
        config = self._load_config(args)
        agent = self._load_checkpoint(args.checkpoint)
        saver = self._open_run("track", config)
        report = run_tracking(agent, config, logger=self.logger, reshadow_every=args.reshadow_every)

        saver.save_checkpoint(agent)
        saver.save_summary(
            {
                "slots": report.slots,
                "trained_slots": report.trained_slots,
                "mean_sum_rate_per_ap": float(sum(report.sum_rates) / max(len(report.sum_rates), 1)),
            }
        )
        saver.save_manifest()
        print(f"{report.slots}スロット中 {report.trained_slots}スロットで再学習しました")
        return 0

    def cmd_verify(self, args) -> int:
        """verifyコマンドの実行"""
        config = self._load_config(args)
        saver = self._open_run("verify", config)
        report = run_verification(config.seed, self.logger)

        saver.save_json("verification", report.to_dict())
        saver.save_manifest()

        print("\n=== 検証結果 ===")
        for check in report.checks:
            mark = "✓" if check.passed else "✗"
            print(f"{mark} {check.name}: {check.measured}")
        if not report.passed:
            self.logger.error(f"検証に失敗しました: {', '.join(report.failed())}")
            return 1
        return 0

    def cmd_config(self, args) -> int:
        """configコマンドの実行"""
        config = self._load_config(args)
        if args.save:
            cm = ConfigManager(args.config)
            config.write_to(cm)
            cm.save_config(args.save)
            print(f"設定を保存しました: {args.save}")
        if args.show or not args.save:
            self._show_config(config)
        return 0

    @staticmethod
    def _show_config(config: TrainConfig):
        """現在の設定を表示"""
        print("現在の設定:")
        section = None
        for f in fields(config):
            if f.metadata["section"] != section:
                section = f.metadata["section"]
                print(f"\n[{section}]")
            value = getattr(config, f.name)
            print(f"  {config_key(f.name)} = {'' if value is None else value}")


def main():
    """メイン関数"""
    sys.exit(PowerControlCLI().run())


if __name__ == "__main__":
    main()
