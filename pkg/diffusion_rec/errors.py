"""diffusion_rec 的例外階層。

所有對外丟出的錯誤都繼承 DiffusionRecError，CLI 依類別對應到不同的 exit code。
"""

from __future__ import annotations


class DiffusionRecError(Exception):
    """套件共同的基底例外。"""


class UnknownNodeError(DiffusionRecError, KeyError):
    """查詢了尚未註冊的使用者或物品。"""


class MissingEdgeError(DiffusionRecError, KeyError):
    """刪除（或假設存在）一條圖中不存在的邊。"""


class DenseSizeLimitError(DiffusionRecError, ValueError):
    """物品數超過稠密矩陣上限。"""


class DimensionMismatchError(DiffusionRecError, ValueError):
    pass


class ConfigError(DiffusionRecError, ValueError):
    pass


class DatasetParseError(DiffusionRecError, ValueError):
    """資料檔格式錯誤；line_no 為 1-based 行號（未知時為 None）。"""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"第 {line_no} 行：{message}"
        super().__init__(message)


class SnapshotError(DiffusionRecError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class SnapshotCorruptError(SnapshotError):
    """檔案被截斷或 checksum 不符。"""


class GraphAuditError(DiffusionRecError, RuntimeError):
    """雙向鄰接表或度數帳不一致。"""


class VerificationError(DiffusionRecError, RuntimeError):
    pass
