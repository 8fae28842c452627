"""稠密傳播矩陣（桌面規模專用）。

M 以 |I|×|I| 的 float64 陣列保存；只給 oracle 與驗證使用，
大規模系統請走 adaptive 的稀疏欄儲存。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from diffusion_rec.errors import DenseSizeLimitError

DEFAULT_DENSE_ITEM_CAP = 20000


def check_dense_cap(n_items: int, cap: int = DEFAULT_DENSE_ITEM_CAP) -> None:
    if n_items > cap:
        raise DenseSizeLimitError(f"物品數 {n_items} 超過稠密矩陣上限 {cap}")


@dataclass
class DensePropMatrix:
    """m_{αβ}：物品 β 的初始資源最後流到物品 α 的比例。"""

    values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.float64))
    edge_count: int = 0

    @property
    def n_items(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def zeros(cls, n_items: int, edge_count: int = 0) -> "DensePropMatrix":
        return cls(np.zeros((n_items, n_items), dtype=np.float64), edge_count)

    def grow(self, n_items: int) -> None:
        """補上全零的新列/新欄，直到 n_items × n_items。"""
        old = self.n_items
        if n_items <= old:
            return
        grown = np.zeros((n_items, n_items), dtype=np.float64)
        grown[:old, :old] = self.values
        self.values = grown

    def transpose(self) -> "DensePropMatrix":
        return DensePropMatrix(self.values.T.copy(), self.edge_count)

    def copy(self) -> "DensePropMatrix":
        return DensePropMatrix(self.values.copy(), self.edge_count)

    # column provider
    def iter_column(self, beta: int) -> Iterator[tuple[int, float]]:
        col = self.values[:, beta]
        for alpha in np.flatnonzero(col).tolist():
            yield alpha, float(col[alpha])
