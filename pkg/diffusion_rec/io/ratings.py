"""評分紀錄 → 二元邊事件

支援格式：
- ratings-tsv：user, item, rating, timestamp（欄位順序可設定），只保留 rating > 門檻
- pairs-tsv  ：user, item, timestamp（書籤類資料，沒有評分）
- synthetic  ：不讀檔，改由 io.synthetic 產生稀疏串流

輸出依 (timestamp, 輸入順序) 排序；同一 (user, item) 只保留最早的一筆。
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Sequence

import pandas as pd
import pytz

from diffusion_rec.errors import ConfigError, DatasetParseError
from diffusion_rec.graph.bipartite import EdgeEvent, EdgeOp

logger = logging.getLogger(__name__)

_INT_PATTERN = r"[+-]?\d+"
_KNOWN_FIELDS = {"user", "item", "rating", "timestamp", "-"}


class DatasetFormat(str, Enum):
    RATINGS_TSV = "ratings-tsv"
    PAIRS_TSV = "pairs-tsv"
    SYNTHETIC = "synthetic"


DEFAULT_FIELD_ORDER = {
    DatasetFormat.RATINGS_TSV: ("user", "item", "rating", "timestamp"),
    DatasetFormat.PAIRS_TSV: ("user", "item", "timestamp"),
}


@dataclass(frozen=True)
class DatasetSpec:
    path: str | None = None
    format: DatasetFormat = DatasetFormat.RATINGS_TSV
    rating_threshold: int = 2
    field_order: tuple[str, ...] | None = None
    delimiter: str = "\t"
    synthetic_users: int = 2000
    synthetic_items: int = 4000
    synthetic_degree: float = 3.8
    synthetic_seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "format", DatasetFormat(self.format))
        except ValueError:
            raise ConfigError(f"未知的資料格式: {self.format!r}") from None
        if self.field_order is not None:
            object.__setattr__(self, "field_order", tuple(self.field_order))

    def resolved_field_order(self) -> tuple[str, ...]:
        order = self.field_order or DEFAULT_FIELD_ORDER[self.format]
        unknown = set(order) - _KNOWN_FIELDS
        if unknown:
            raise ConfigError(f"field_order 含未知欄位: {sorted(unknown)}")
        named = [f for f in order if f != "-"]
        if len(named) != len(set(named)):
            raise ConfigError(f"field_order 欄位重複: {order}")
        if "user" not in order or "item" not in order:
            raise ConfigError("field_order 必須包含 user 與 item")
        if self.format is DatasetFormat.RATINGS_TSV and "rating" not in order:
            raise ConfigError("ratings-tsv 的 field_order 必須包含 rating")
        return tuple(order)

    def describe(self) -> str:
        if self.format is DatasetFormat.SYNTHETIC:
            return (
                f"synthetic(users={self.synthetic_users}, items={self.synthetic_items}, "
                f"degree={self.synthetic_degree}, seed={self.synthetic_seed})"
            )
        return f"{self.format.value}:{self.path}"


def _line_from_parser_error(exc: Exception) -> int | None:
    match = re.search(r"line (\d+)", str(exc))
    return int(match.group(1)) if match else None


def _first_bad_line(mask: pd.Series) -> int:
    return int(mask.idxmax()) + 1


def _read_table(path: Path, delimiter: str) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            sep=delimiter,
            header=None,
            dtype=str,
            keep_default_na=False,
            na_values=[],
            skip_blank_lines=False,
            quoting=csv.QUOTE_NONE,
            engine="c" if len(delimiter) == 1 else "python",
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except pd.errors.ParserError as exc:
        raise DatasetParseError("欄位數不一致", _line_from_parser_error(exc)) from exc
    except UnicodeDecodeError as exc:
        raise DatasetParseError(f"無法以 UTF-8 解碼: {exc}") from exc


def parse_ratings(spec: DatasetSpec) -> list[EdgeEvent]:
    if spec.format is DatasetFormat.SYNTHETIC:
        raise ConfigError("synthetic 格式沒有檔案可解析，請用 load_events()")
    if spec.path is None:
        raise DatasetParseError("未指定資料檔路徑")
    path = Path(spec.path)
    if not path.is_file():
        raise DatasetParseError(f"找不到資料檔: {path}")

    fields = spec.resolved_field_order()
    raw = _read_table(path, spec.delimiter)
    if raw.empty:
        return []

    # 每行實際的欄位數；短少的欄位會是 NaN
    present = raw.notna().sum(axis=1)
    text = raw.fillna("").apply(lambda s: s.str.strip())
    blank = (text == "").all(axis=1)
    bad = ~blank & ((present != len(fields)) | (text == "").any(axis=1))
    if bad.any():
        raise DatasetParseError(f"欄位數不符（預期 {len(fields)} 欄）", _first_bad_line(bad))
    frame = text[~blank].copy()
    if frame.empty:
        return []
    frame.columns = [f if f != "-" else f"_skip{i}" for i, f in enumerate(fields)]

    # 先檢查每一行的所有欄位，再套評分門檻；被門檻濾掉的壞行也要回報
    checked = [("rating", "評分")] if spec.format is DatasetFormat.RATINGS_TSV else []
    if "timestamp" in fields:
        checked.append(("timestamp", "時間戳"))
    if checked:
        bad_cells = pd.concat({name: ~frame[name].str.fullmatch(_INT_PATTERN) for name, _ in checked}, axis=1)
        bad = bad_cells.any(axis=1)
        if bad.any():
            line = _first_bad_line(bad)
            name, title = next((n, t) for n, t in checked if bad_cells.loc[line - 1, n])
            raise DatasetParseError(f"{title}不是整數: {frame.loc[line - 1, name]!r}", line)

    if "timestamp" in fields:
        ts = frame["timestamp"].astype("int64")
    else:
        ts = pd.Series(frame.index.to_numpy() + 1, index=frame.index, dtype="int64")

    if spec.format is DatasetFormat.RATINGS_TSV:
        keep = frame["rating"].astype("int64") > spec.rating_threshold
        frame, ts = frame[keep], ts[keep]

    table = pd.DataFrame({"user": frame["user"], "item": frame["item"], "timestamp": ts})
    table = table.sort_values("timestamp", kind="stable")
    before = len(table)
    table = table.drop_duplicates(subset=["user", "item"], keep="first")
    if before != len(table):
        logger.debug("%s：略過 %d 筆重複的 (user, item)", path.name, before - len(table))

    return [
        EdgeEvent(user, item, int(t), EdgeOp.ADD)
        for user, item, t in zip(table["user"], table["item"], table["timestamp"])
    ]


def load_events(spec: DatasetSpec) -> list[EdgeEvent]:
    if spec.format is DatasetFormat.SYNTHETIC:
        from diffusion_rec.io.synthetic import generate_sparse_stream

        return generate_sparse_stream(
            spec.synthetic_users,
            spec.synthetic_items,
            spec.synthetic_degree,
            spec.synthetic_seed,
        )
    return parse_ratings(spec)


@dataclass(frozen=True)
class IngestStats:
    user_count: int
    item_count: int
    edge_count: int
    avg_item_degree: float
    first_ts: int | None = None
    last_ts: int | None = None

    def time_span_utc(self) -> tuple[str, str] | None:
        if self.first_ts is None or self.last_ts is None:
            return None
        fmt = "%Y-%m-%d %H:%M:%S %Z"
        start = datetime.fromtimestamp(self.first_ts, tz=pytz.utc).strftime(fmt)
        end = datetime.fromtimestamp(self.last_ts, tz=pytz.utc).strftime(fmt)
        return start, end


def ingest_stats(events: Sequence[EdgeEvent]) -> IngestStats:
    """以不重複的 id 計數；avg_item_degree = 邊數 / 物品數。"""
    edges = {(e.user, e.item) for e in events if e.op is EdgeOp.ADD}
    users = {u for u, _ in edges}
    items = {i for _, i in edges}
    stamps = [e.timestamp for e in events]
    return IngestStats(
        user_count=len(users),
        item_count=len(items),
        edge_count=len(edges),
        avg_item_degree=len(edges) / len(items) if items else 0.0,
        first_ts=min(stamps) if stamps else None,
        last_ts=max(stamps) if stamps else None,
    )
