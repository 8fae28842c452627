"""檢查點報表 → CSV

欄位固定順序：
edges_fed, algorithm, auc, precision@K..., recall@K..., users_evaluated, us_per_event
數值以 12 位有效數字輸出；沒有合格使用者的指標留空。
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import pandas as pd

from diffusion_rec.eval.stream_harness import CheckpointReport

FLOAT_FORMAT = "%.12g"


def report_columns(ks: Sequence[int]) -> list[str]:
    ks = sorted(ks)
    return (
        ["edges_fed", "algorithm", "auc"]
        + [f"precision@{k}" for k in ks]
        + [f"recall@{k}" for k in ks]
        + ["users_evaluated", "us_per_event"]
    )


def reports_to_frame(reports: Sequence[CheckpointReport], ks: Sequence[int]) -> pd.DataFrame:
    records = []
    for report in reports:
        for name, m in report.metrics.items():
            row = {
                "edges_fed": int(report.edges_fed),
                "algorithm": name,
                "auc": m.auc,
            }
            row.update({f"precision@{k}": m.precision.get(k) for k in ks})
            row.update({f"recall@{k}": m.recall.get(k) for k in ks})
            row["users_evaluated"] = int(m.users_evaluated)
            row["us_per_event"] = float(m.us_per_event)
            records.append(row)
    return pd.DataFrame(records, columns=report_columns(ks))


def write_report(reports: Sequence[CheckpointReport], path: str | os.PathLike, ks: Sequence[int]) -> Path:
    """寫出 CSV（只有表頭也照寫）。回傳實際路徑。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = reports_to_frame(reports, ks)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")
    return path
