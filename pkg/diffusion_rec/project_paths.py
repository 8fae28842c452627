"""專案路徑集中管理。

目標：避免因為模組搬移導致資料/輸出路徑跟著變動。

規則：
- 專案根目錄 = diffusion_rec/ 的上一層
- 資料集固定放在 <root>/data（例如 data/ml-100k/u.data）
- 串流評估輸出固定放在 <root>/stream_outputs
"""

from __future__ import annotations

from pathlib import Path


def get_project_root() -> Path:
    return Path(__file__).resolve().parents[1]


def get_data_dir() -> Path:
    return get_project_root() / "data"


def get_movielens_path() -> Path:
    return get_data_dir() / "ml-100k" / "u.data"


def get_output_dir() -> Path:
    return get_project_root() / "stream_outputs"


def get_default_config_path() -> Path:
    return get_project_root() / "stream_config.toml"
