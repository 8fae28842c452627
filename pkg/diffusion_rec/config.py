"""執行設定：dataclass 預設值 < TOML 設定檔 < 命令列參數

TOML 範例（stream_config.toml）：

    [dataset]
    path = "data/ml-100k/u.data"
    format = "ratings-tsv"
    rating_threshold = 2

    [run]
    algorithms = ["static", "aaf", "aas"]
    checkpoint_interval = 5000
    ks = [100, 300, 500]
"""

from __future__ import annotations

import argparse
import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from diffusion_rec.adaptive.column_store import WarmStart
from diffusion_rec.diffusion.dense import DEFAULT_DENSE_ITEM_CAP
from diffusion_rec.errors import ConfigError
from diffusion_rec.eval.engines import ALGORITHM_CHOICES
from diffusion_rec.io.ratings import DatasetFormat, DatasetSpec
from diffusion_rec.project_paths import get_default_config_path, get_movielens_path


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    algorithms: tuple[str, ...] = ("static", "aaf", "aas")
    test_fraction: float = 0.10
    checkpoint_interval: int = 5000
    start_threshold: int = 5000
    ks: tuple[int, ...] = (100, 300, 500)
    hybrid_lambda: float | None = None
    seed: int = 0
    warm_start: str = WarmStart.EXACT_INIT.value
    output: str | None = None
    snapshot_at: int | None = None
    resume: str | None = None
    snapshot_path: str | None = None
    dense_cap: int = DEFAULT_DENSE_ITEM_CAP
    static_dense: bool = False
    batch_users: int = 256
    timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(dict.fromkeys(self.algorithms)))
        object.__setattr__(self, "ks", tuple(sorted(set(int(k) for k in self.ks))))
        validate(self)


def validate(cfg: RunConfig) -> None:
    if not cfg.algorithms:
        raise ConfigError("至少需要一個演算法")
    unknown = [a for a in cfg.algorithms if a not in ALGORITHM_CHOICES]
    if unknown:
        raise ConfigError(f"未知的演算法: {unknown}（可用：{', '.join(ALGORITHM_CHOICES)}）")
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ConfigError(f"test_fraction 必須介於 0 與 1 之間，收到 {cfg.test_fraction}")
    for name in ("checkpoint_interval", "start_threshold", "dense_cap", "batch_users"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} 必須為正整數，收到 {getattr(cfg, name)}")
    if not cfg.ks or cfg.ks[0] < 1:
        raise ConfigError(f"K 必須為正整數，收到 {cfg.ks}")
    if cfg.hybrid_lambda is not None and not 0.0 <= cfg.hybrid_lambda <= 1.0:
        raise ConfigError(f"hybrid_lambda 必須落在 [0, 1]，收到 {cfg.hybrid_lambda}")
    try:
        WarmStart(cfg.warm_start)
    except ValueError:
        raise ConfigError(f"未知的暖機模式: {cfg.warm_start!r}（可用：exact-init, replay）") from None
    if cfg.snapshot_at is not None and cfg.snapshot_at < cfg.start_threshold:
        raise ConfigError(f"snapshot_at ({cfg.snapshot_at}) 不可小於 start_threshold ({cfg.start_threshold})")


def config_digest(cfg: RunConfig) -> str:
    """影響串流結果的欄位做 SHA-256；輸出路徑與計時開關不列入。"""
    payload = {
        "dataset": {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(cfg.dataset).items()},
        "algorithms": list(cfg.algorithms),
        "test_fraction": cfg.test_fraction,
        "checkpoint_interval": cfg.checkpoint_interval,
        "start_threshold": cfg.start_threshold,
        "ks": list(cfg.ks),
        "hybrid_lambda": cfg.hybrid_lambda,
        "seed": cfg.seed,
        "warm_start": cfg.warm_start,
        "dense_cap": cfg.dense_cap,
        "static_dense": cfg.static_dense,
        "batch_users": cfg.batch_users,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ============================================================
# 組合：TOML + argparse
# ============================================================
_DATASET_KEYS = {f.name for f in fields(DatasetSpec)}
_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"dataset"}

# 命令列參數名 → DatasetSpec 欄位
_DATASET_FLAGS = {
    "dataset": "path",
    "format": "format",
    "rating_threshold": "rating_threshold",
    "field_order": "field_order",
    "delimiter": "delimiter",
    "synthetic_users": "synthetic_users",
    "synthetic_items": "synthetic_items",
    "synthetic_degree": "synthetic_degree",
    "synthetic_seed": "synthetic_seed",
}


def _split_csv(value: Any) -> tuple:
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return tuple(value)


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"找不到設定檔: {path}")
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"設定檔格式錯誤（{path}）: {exc}") from exc
    unknown_tables = set(data) - {"dataset", "run"}
    if unknown_tables:
        raise ConfigError(f"設定檔含未知的表: {sorted(unknown_tables)}")
    for table, known in (("dataset", _DATASET_KEYS), ("run", _RUN_KEYS)):
        extra = set(data.get(table, {})) - known
        if extra:
            raise ConfigError(f"[{table}] 含未知欄位: {sorted(extra)}")
    return data


def _coerce_run_values(values: dict) -> dict:
    out = dict(values)
    if "algorithms" in out:
        out["algorithms"] = _split_csv(out["algorithms"])
    if "ks" in out:
        try:
            out["ks"] = tuple(int(k) for k in _split_csv(out["ks"]))
        except ValueError:
            raise ConfigError(f"ks 必須是整數清單，收到 {out['ks']!r}") from None
    for name in ("output", "resume", "snapshot_path"):
        if out.get(name) is not None:
            out[name] = str(out[name])
    return out


def _coerce_dataset_values(values: dict) -> dict:
    out = dict(values)
    if out.get("field_order") is not None:
        out["field_order"] = _split_csv(out["field_order"])
    if out.get("path") is not None:
        out["path"] = str(out["path"])
    return out


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """依優先順序合成 RunConfig；任何不合法的值都丟 ConfigError。"""
    config_path = getattr(args, "config", None)
    data: dict = {}
    if config_path is not None:
        data = load_toml(config_path)
    elif get_default_config_path().is_file():
        data = load_toml(get_default_config_path())

    dataset_values = _coerce_dataset_values(data.get("dataset", {}))
    for flag, key in _DATASET_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            dataset_values[key] = value
    dataset_values = _coerce_dataset_values(dataset_values)

    run_values = dict(data.get("run", {}))
    for key in _RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            run_values[key] = value
    run_values = _coerce_run_values(run_values)

    try:
        dataset = DatasetSpec(**dataset_values)
        if dataset.path is None and dataset.format is not DatasetFormat.SYNTHETIC:
            dataset = replace(dataset, path=str(get_movielens_path()))
        return RunConfig(dataset=dataset, **run_values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"設定欄位型別錯誤: {exc}") from exc
