import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path

import pytz

from diffusion_rec.config import RunConfig, build_run_config, config_digest
from diffusion_rec.errors import (
    ConfigError,
    DatasetParseError,
    DiffusionRecError,
    SnapshotError,
    VerificationError,
)
from diffusion_rec.eval.engines import ALGORITHM_CHOICES, make_engine
from diffusion_rec.eval.metrics import SplitSpec, split_edges
from diffusion_rec.eval.stream_harness import CheckpointReport, StreamRunner, StreamSettings
from diffusion_rec.io.ratings import DatasetFormat, ingest_stats, load_events
from diffusion_rec.io.report import write_report
from diffusion_rec.io.snapshot import Snapshot, load_snapshot, save_snapshot
from diffusion_rec.oracle.verify import verify_oracle
from diffusion_rec.project_paths import get_output_dir

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_VERIFY = 4
EXIT_SNAPSHOT = 5

BANNER = "=" * 60


def _now_tag() -> str:
    return datetime.now(pytz.timezone("Asia/Taipei")).strftime("%Y%m%d_%H%M%S")


def _default_output(cfg: RunConfig) -> Path:
    algo_tag = "+".join(cfg.algorithms)
    return get_output_dir() / f"{algo_tag}_{cfg.dataset.format.value}_{_now_tag()}.csv"


def _default_snapshot_path(cursor: int) -> Path:
    return get_output_dir() / f"snapshot_l{cursor}.dfrs"


def _settings(cfg: RunConfig) -> StreamSettings:
    return StreamSettings(
        checkpoint_interval=cfg.checkpoint_interval,
        ks=cfg.ks,
        start_threshold=cfg.start_threshold,
        warm_start=cfg.warm_start,
        batch_users=cfg.batch_users,
        timing=cfg.timing,
    )


def _build_runner(cfg: RunConfig) -> StreamRunner:
    events = load_events(cfg.dataset)
    train, test = split_edges(events, SplitSpec(cfg.test_fraction, cfg.seed))
    print(f"資料集：{cfg.dataset.describe()}")
    print(f"事件數：{len(events)}（訓練 {len(train)} / 測試 {len(test)}）")

    if cfg.resume:
        snapshot = load_snapshot(cfg.resume)
        if snapshot.config_digest != config_digest(cfg):
            raise ConfigError(f"快照 {cfg.resume} 的設定摘要與目前設定不同，無法接續")
        runner = StreamRunner.from_state(
            snapshot.runner_state,
            train,
            test,
            _settings(cfg),
            lam=cfg.hybrid_lambda,
            dense_cap=cfg.dense_cap,
            static_dense=cfg.static_dense,
        )
        print(f"[OK] 從快照接續：已餵入 {runner.cursor} 條邊")
        return runner

    engines = [
        make_engine(
            name,
            lam=cfg.hybrid_lambda,
            dense_cap=cfg.dense_cap,
            static_dense=cfg.static_dense,
            seed=cfg.seed,
        )
        for name in cfg.algorithms
    ]
    return StreamRunner(engines, train, test, _settings(cfg))


def _save_runner(runner: StreamRunner, cfg: RunConfig) -> Path:
    path = Path(cfg.snapshot_path) if cfg.snapshot_path else _default_snapshot_path(runner.cursor)
    save_snapshot(Snapshot(config_digest(cfg), runner.to_state()), path)
    print(f"[OK] 快照已儲存：{path}（l={runner.cursor}）")
    return path


def _print_reports(reports: list[CheckpointReport], ks: tuple[int, ...]) -> None:
    k_head = ks[0]
    for i, report in enumerate(reports, 1):
        parts = []
        for name, m in report.metrics.items():
            parts.append(f"{name} AUC={m.auc:.4f} P@{k_head}={m.precision[k_head]:.4f}")
        users = next(iter(report.metrics.values())).users_evaluated if report.metrics else 0
        print(f"[{i}/{len(reports)}] l={report.edges_fed} 使用者={users} | " + " | ".join(parts))


# ============================================================
# 子命令
# ============================================================
def cmd_stats(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    events = load_events(cfg.dataset)
    stats = ingest_stats(events)
    print(BANNER)
    print(f"資料集：{cfg.dataset.describe()}")
    print(BANNER)
    print(f"使用者數 users: {stats.user_count}")
    print(f"物品數 items: {stats.item_count}")
    print(f"邊數 edges: {stats.edge_count}")
    print(f"平均物品度數 avg_item_degree: {stats.avg_item_degree:.2f}")
    span = stats.time_span_utc()
    if span and cfg.dataset.format is not DatasetFormat.SYNTHETIC:
        print(f"時間範圍: {span[0]} ~ {span[1]}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    print(BANNER)
    print(f"串流回測：{', '.join(cfg.algorithms)}")
    print(f"檢查點每 {cfg.checkpoint_interval} 條邊，暖機 {cfg.start_threshold} 條，K={list(cfg.ks)}")
    print(BANNER)
    runner = _build_runner(cfg)

    reports: list[CheckpointReport] = []
    if cfg.snapshot_at is not None and not cfg.resume:
        if cfg.snapshot_at > len(runner.train):
            raise ConfigError(f"snapshot_at ({cfg.snapshot_at}) 超過訓練邊數 {len(runner.train)}")
        reports.extend(runner.run(until=cfg.snapshot_at))
        _save_runner(runner, cfg)
    reports.extend(runner.run())

    if not reports:
        print("[!] 沒有任何檢查點（start_threshold 大於訓練邊數？）")
    _print_reports(reports, cfg.ks)

    output = Path(cfg.output) if cfg.output else _default_output(cfg)
    write_report(reports, output, cfg.ks)
    print(f"[OK] 報表：{output}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    print(BANNER)
    print(f"oracle 驗證：{args.events} 個隨機事件，圖 ≤ {args.max_users}×{args.max_items}，seed={args.seed}")
    print(BANNER)
    summary = verify_oracle(
        n_events=args.events,
        max_users=args.max_users,
        max_items=args.max_items,
        seed=args.seed,
        tol=args.tol,
        n_graphs=args.graphs,
    )
    print(f"oracle 最大偏差：{summary.oracle_max_deviation:.3e}（{summary.events} 個事件）")
    print(f"單一事件稽核：AAF 最大誤差 {summary.audit_aaf_max_error:.6f}，AAS 最大誤差 {summary.audit_aas_max_error:.6f}")
    print(f"可逆性最大偏差：{summary.reversibility_max_deviation:.3e}（{summary.graphs_checked} 張圖）")
    print(f"守恆最大偏差：{summary.conservation_max_deviation:.3e}")
    print(
        f"串流誤差：AAF {summary.stream_aaf_max_error:.6f}，AAS {summary.stream_aas_max_error:.6f}"
        f"（AAS > AAF 的步數 {summary.stream_dominance_violations}）"
    )
    for line in summary.violations[:20]:
        print(f"[!] {line}")
    if not summary.passed:
        raise VerificationError(f"驗證失敗：{len(summary.violations)} 項稽核不符或偏差超過 {summary.tol:g}")
    print("[OK] 全部通過")
    return EXIT_OK


def cmd_snapshot_save(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    if cfg.snapshot_at is None:
        raise ConfigError("snapshot save 需要 --at")
    runner = _build_runner(cfg)
    if cfg.snapshot_at > len(runner.train):
        raise ConfigError(f"--at ({cfg.snapshot_at}) 超過訓練邊數 {len(runner.train)}")
    runner.run(until=cfg.snapshot_at)
    _save_runner(runner, cfg)
    return EXIT_OK


def cmd_snapshot_load(args: argparse.Namespace) -> int:
    snapshot = load_snapshot(args.path)
    print(BANNER)
    print(f"快照：{args.path}")
    print(BANNER)
    for key, value in snapshot.summary().items():
        print(f"{key}: {value}")
    print("[OK] 快照有效")
    return EXIT_OK


# ============================================================
# argparse
# ============================================================
def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="TOML 設定檔（預設讀 stream_config.toml，若存在）")
    parser.add_argument("--dataset", default=None, help="資料檔路徑（預設 data/ml-100k/u.data）")
    parser.add_argument("--format", default=None, choices=[f.value for f in DatasetFormat], help="資料格式")
    parser.add_argument("--rating-threshold", type=int, default=None, help="ratings-tsv 只保留評分大於此值的紀錄（預設 2）")
    parser.add_argument("--field-order", default=None, help="欄位順序，例如 user,item,rating,timestamp；'-' 表示略過該欄")
    parser.add_argument("--delimiter", default=None, help="欄位分隔符（預設 TAB）")
    parser.add_argument("--synthetic-users", type=int, default=None, help="synthetic：使用者數")
    parser.add_argument("--synthetic-items", type=int, default=None, help="synthetic：物品數")
    parser.add_argument("--synthetic-degree", type=float, default=None, help="synthetic：平均物品度數")
    parser.add_argument("--synthetic-seed", type=int, default=None, help="synthetic：亂數種子")


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    _add_dataset_arguments(parser)
    parser.add_argument("--algorithms", default=None, help=f"逗號分隔，可用 {','.join(ALGORITHM_CHOICES)}")
    parser.add_argument("--test-fraction", type=float, default=None, help="測試集比例（預設 0.10）")
    parser.add_argument("--checkpoint-interval", type=int, default=None, help="每幾條邊做一次評估（預設 5000）")
    parser.add_argument("--start-threshold", type=int, default=None, help="暖機邊數（預設 5000）")
    parser.add_argument("--ks", default=None, help="推薦長度，逗號分隔（預設 100,300,500）")
    parser.add_argument("--hybrid-lambda", type=float, default=None, help="MD/HC 混合權重 λ ∈ [0,1]（不給則純 MD）")
    parser.add_argument("--seed", type=int, default=None, help="切分與隨機基準的種子")
    parser.add_argument("--warm-start", default=None, choices=["exact-init", "replay"], help="暖機方式")
    parser.add_argument("--dense-cap", type=int, default=None, help="--static-dense 時稠密矩陣的物品數上限")
    parser.add_argument(
        "--static-dense", action="store_true", default=None, help="static 改用稠密 M（桌面規模對照用，預設逐人擴散）"
    )
    parser.add_argument("--batch-users", type=int, default=None, help="評估時每批使用者數")
    parser.add_argument("--snapshot-path", default=None, help="快照輸出路徑")
    parser.add_argument("--no-timing", dest="timing", action="store_false", default=None, help="us_per_event 一律寫 0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="二部圖擴散推薦：自適應更新（AAF/AAS）串流回測")
    parser.add_argument("--verbose", action="store_true", help="輸出 DEBUG 訊息")
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="資料集基本統計")
    _add_dataset_arguments(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_run = sub.add_parser("run", help="串流回測並輸出 CSV 報表")
    _add_run_arguments(p_run)
    p_run.add_argument("--output", default=None, help="CSV 輸出路徑（預設 stream_outputs/ 下自動命名）")
    p_run.add_argument("--snapshot-at", type=int, default=None, help="餵到第 N 條訓練邊時存快照")
    p_run.add_argument("--resume", default=None, help="從快照接續，只輸出游標之後的檢查點")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="oracle 與 AAF/AAS 誤差稽核")
    p_verify.add_argument("--events", type=int, default=200, help="隨機事件數")
    p_verify.add_argument("--max-users", type=int, default=50)
    p_verify.add_argument("--max-items", type=int, default=80)
    p_verify.add_argument("--graphs", type=int, default=100, help="檢查可逆性/守恆的隨機圖數")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--tol", type=float, default=1e-12)
    p_verify.set_defaults(func=cmd_verify)

    p_snap = sub.add_parser("snapshot", help="快照存檔 / 檢查")
    snap_sub = p_snap.add_subparsers(dest="snapshot_command", required=True)
    p_save = snap_sub.add_parser("save", help="串流到 --at 條邊後存快照")
    _add_run_arguments(p_save)
    p_save.add_argument("--at", dest="snapshot_at", type=int, default=None, help="存檔時已餵入的訓練邊數")
    p_save.set_defaults(func=cmd_snapshot_save)
    p_load = snap_sub.add_parser("load", help="驗證快照檔並印出摘要")
    p_load.add_argument("path", help="快照檔路徑")
    p_load.set_defaults(func=cmd_snapshot_load)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"[X] 設定錯誤：{e}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetParseError as e:
        print(f"[X] 資料錯誤：{e}", file=sys.stderr)
        return EXIT_DATASET
    except VerificationError as e:
        print(f"[X] {e}", file=sys.stderr)
        return EXIT_VERIFY
    except SnapshotError as e:
        print(f"[X] 快照錯誤：{e}", file=sys.stderr)
        return EXIT_SNAPSHOT
    except DiffusionRecError as e:
        print(f"[X] {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
