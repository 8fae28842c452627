"""MD / HC 單步擴散核心

- md_from_item：從物品 α 做一次質量擴散（MD），得到 M 的第 α 欄
- hc_from_item：從物品 α 做一次熱傳導（HC），得到 M 的第 α 列（= H 的第 α 欄）
- build_dense_md / build_dense_hc：桌面規模的完整矩陣，H 直接取 M 的轉置
- score_user / recommend_top_k / hybrid_score：f' = W f 與推薦排序

擴散只依序走訪鄰接表（usersOfItem → itemsOfUser），不隨機存取矩陣。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, Iterator, Protocol

import numpy as np

from diffusion_rec.diffusion.dense import DEFAULT_DENSE_ITEM_CAP, DensePropMatrix, check_dense_cap
from diffusion_rec.graph.bipartite import BipartiteGraph


@dataclass
class SparseItemVector:
    """M 的一欄（MD）或一列（HC），只存非零值。"""

    source: int
    values: dict[int, float] = field(default_factory=dict)
    degenerate: bool = False

    def get(self, item: int) -> float:
        return self.values.get(item, 0.0)


@dataclass
class ScoreVector:
    """目標使用者的最終資源分布 f'（以內部物品索引為下標）。"""

    user: int
    values: np.ndarray
    edge_count: int
    degenerate: bool = False


class ColumnProvider(Protocol):
    """score_user 需要的唯一介面：給出傳播矩陣第 β 欄的非零項。"""

    def iter_column(self, beta: int) -> Iterable[tuple[int, float]]: ...


def _spread_from_item(g: BipartiteGraph, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """α → 鄰居使用者 j → j 的物品 β，回傳 (β 陣列, Σ_j 1/k_j)。"""
    users = g.neighbors_of_item(alpha)
    if not users:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    lists = [g.neighbors_of_user(j) for j in users]
    lengths = np.fromiter(map(len, lists), dtype=np.int64, count=len(lists))
    targets = np.fromiter(chain.from_iterable(lists), dtype=np.int64, count=int(lengths.sum()))
    weights = np.repeat(1.0 / lengths, lengths)
    keys, inverse = np.unique(targets, return_inverse=True)
    sums = np.bincount(inverse.ravel(), weights=weights, minlength=len(keys))
    return keys, sums


def md_from_item(g: BipartiteGraph, alpha: int) -> SparseItemVector:
    """m_{βα} = (1/k_α) Σ_i a_{iβ} a_{iα} / k_i；各值加總為 1。"""
    k_alpha = g.item_degree(alpha)
    if k_alpha == 0:
        return SparseItemVector(alpha, {}, degenerate=True)
    keys, sums = _spread_from_item(g, alpha)
    vals = sums / k_alpha
    return SparseItemVector(alpha, dict(zip(keys.tolist(), vals.tolist())))


def hc_from_item(g: BipartiteGraph, alpha: int) -> SparseItemVector:
    """熱傳導：使用者取其物品的平均，物品再取其使用者的平均。

    結果第 β 項 = h_{βα} = m_{αβ}。
    """
    if g.item_degree(alpha) == 0:
        return SparseItemVector(alpha, {}, degenerate=True)
    keys, sums = _spread_from_item(g, alpha)
    degrees = np.fromiter((g.item_degree(b) for b in keys.tolist()), dtype=np.float64, count=len(keys))
    vals = sums / degrees
    return SparseItemVector(alpha, dict(zip(keys.tolist(), vals.tolist())))


def build_dense_md(g: BipartiteGraph, cap: int = DEFAULT_DENSE_ITEM_CAP) -> DensePropMatrix:
    check_dense_cap(g.n_items, cap)
    m = DensePropMatrix.zeros(g.n_items, g.edge_count)
    for alpha in range(g.n_items):
        col = md_from_item(g, alpha)
        if col.values:
            rows = np.fromiter(col.values.keys(), dtype=np.int64, count=len(col.values))
            m.values[rows, alpha] = np.fromiter(col.values.values(), dtype=np.float64, count=len(col.values))
    return m


def build_dense_hc(g: BipartiteGraph, cap: int = DEFAULT_DENSE_ITEM_CAP) -> DensePropMatrix:
    # M^T = H：逐位元等於 MD 矩陣的轉置
    return build_dense_md(g, cap).transpose()


class LiveMDColumns:
    """直接在目前的圖上做 MD，當作 column provider（靜態演算法）。"""

    def __init__(self, g: BipartiteGraph):
        self.g = g

    def iter_column(self, beta: int) -> Iterator[tuple[int, float]]:
        return iter(md_from_item(self.g, beta).values.items())


class LiveHCColumns:
    """H 的第 β 欄 = 從 β 出發的 HC。"""

    def __init__(self, g: BipartiteGraph):
        self.g = g

    def iter_column(self, beta: int) -> Iterator[tuple[int, float]]:
        return iter(hc_from_item(self.g, beta).values.items())


def score_user(columns: ColumnProvider, g: BipartiteGraph, user: int) -> ScoreVector:
    """f'_α = Σ_{β∈Γ_i} w_{αβ}，f 取 a_{iα}（收藏的物品各一單位資源）。"""
    profile = g.neighbors_of_user(user)
    scores = np.zeros(g.n_items, dtype=np.float64)
    for beta in profile:
        for alpha, value in columns.iter_column(beta):
            scores[alpha] += value
    return ScoreVector(user, scores, g.edge_count, degenerate=not profile)


def recommend_top_k(scores: ScoreVector, collected: Iterable[int], k: int) -> list[int]:
    """未收藏物品依分數遞減排序；同分時內部索引小者在前。"""
    if k < 1:
        raise ValueError(f"K 必須 ≥ 1，收到 {k}")
    mask = np.ones(len(scores.values), dtype=bool)
    collected = list(collected)
    if collected:
        mask[collected] = False
    candidates = np.flatnonzero(mask)
    order = np.argsort(-scores.values[candidates], kind="stable")
    return candidates[order[:k]].tolist()


def hybrid_score(
    columns_md: ColumnProvider,
    columns_hc: ColumnProvider,
    g: BipartiteGraph,
    user: int,
    lam: float,
) -> ScoreVector:
    """λ·MD + (1−λ)·HC；λ=1 退化為 MD、λ=0 退化為 HC。"""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"λ 必須落在 [0, 1]，收到 {lam}")
    md = score_user(columns_md, g, user)
    hc = score_user(columns_hc, g, user)
    mixed = lam * md.values + (1.0 - lam) * hc.values
    return ScoreVector(user, mixed, g.edge_count, degenerate=md.degenerate)
