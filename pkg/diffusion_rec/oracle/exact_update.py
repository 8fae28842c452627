"""精確增量 oracle

新增邊 (i, α) 時，M 中改變的非對角元素分成四型：
- Type I  ：(β, α)，β ∈ Γ_i
- Type II ：(γ, α)，γ 與 α 有共同使用者，但 γ ∉ Γ_i
- Type III：(α, β)，β ∈ Γ_i
- Type IV ：(μ, β)，μ, β ∈ Γ_i，μ ≠ β
（Γ_i 取加邊前，且不含 α）

對角元素不屬於任何一型，另外依鄰居直接重算。
刪除邊時不用反推公式，直接在刪除後的圖上重算同一批位置。
整個矩陣稠密存放，僅限桌面規模，用來當 adaptive 引擎的標準答案。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from diffusion_rec.diffusion.dense import DEFAULT_DENSE_ITEM_CAP, DensePropMatrix, check_dense_cap
from diffusion_rec.diffusion.kernels import hc_from_item, md_from_item
from diffusion_rec.errors import MissingEdgeError
from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent, EdgeOp, EdgeOutcome


class ChangeType(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


@dataclass(frozen=True)
class LedgerEntry:
    row: int
    col: int
    type: ChangeType
    delta: float | None = None


@dataclass
class ChangeLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def positions(self, change_type: ChangeType | None = None) -> set[tuple[int, int]]:
        return {
            (e.row, e.col)
            for e in self.entries
            if change_type is None or e.type is change_type
        }

    def by_position(self) -> dict[tuple[int, int], LedgerEntry]:
        return {(e.row, e.col): e for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class _AddContext:
    user: int
    item: int
    new_user: bool
    new_item: bool
    profile: tuple[int, ...]  # Γ_i（加邊前）
    k_user: int  # k_i^{(l)}
    k_item: int  # k_α^{(l)}


def _add_context(g_before: BipartiteGraph, user_label: str, item_label: str) -> _AddContext:
    new_user = user_label not in g_before.users
    new_item = item_label not in g_before.items
    user = g_before.users.peek_index(user_label)
    item = g_before.items.peek_index(item_label)
    profile: tuple[int, ...] = () if new_user else tuple(g_before.neighbors_of_user(user))
    return _AddContext(
        user=user,
        item=item,
        new_user=new_user,
        new_item=new_item,
        profile=profile,
        k_user=len(profile),
        k_item=0 if new_item else g_before.item_degree(item),
    )


def _co_collected(g: BipartiteGraph, item: int) -> set[int]:
    """和 item 至少有一位共同使用者的物品（含 item 本身）。"""
    result: set[int] = set()
    for j in g.neighbors_of_item(item):
        result.update(g.neighbors_of_user(j))
    return result


def classify_changes(g_before: BipartiteGraph, user_label: str, item_label: str) -> ChangeLedger:
    """只列出位置與型別（delta=None）。邊已存在時回傳空帳。"""
    ctx = _add_context(g_before, user_label, item_label)
    if not ctx.new_user and not ctx.new_item and g_before.has_edge(ctx.user, ctx.item):
        return ChangeLedger()

    alpha = ctx.item
    profile = [b for b in ctx.profile if b != alpha]
    profile_set = set(profile)
    entries: list[LedgerEntry] = []

    entries.extend(LedgerEntry(b, alpha, ChangeType.I) for b in profile)
    if not ctx.new_item:
        others = sorted(_co_collected(g_before, alpha) - profile_set - {alpha})
        entries.extend(LedgerEntry(c, alpha, ChangeType.II) for c in others)
    entries.extend(LedgerEntry(alpha, b, ChangeType.III) for b in profile)
    entries.extend(
        LedgerEntry(mu, b, ChangeType.IV)
        for b in profile
        for mu in profile
        if mu != b
    )
    return ChangeLedger(entries)


def compute_deltas(
    m: DensePropMatrix,
    g_before: BipartiteGraph,
    user_label: str,
    item_label: str,
) -> ChangeLedger:
    """把 classify_changes 的每個位置填上 δ（四條更新公式）。"""
    ctx = _add_context(g_before, user_label, item_label)
    ledger = classify_changes(g_before, user_label, item_label)
    if not ledger.entries:
        return ledger

    alpha = ctx.item
    k_alpha_next = ctx.k_item + 1
    k_i = ctx.k_user
    k_i_next = k_i + 1

    def old_value(row: int, col: int) -> float:
        if row >= m.n_items or col >= m.n_items:
            return 0.0
        return float(m.values[row, col])

    filled: list[LedgerEntry] = []
    for e in ledger.entries:
        if e.type is ChangeType.I:
            delta = -old_value(e.row, alpha) / k_alpha_next + 1.0 / (k_alpha_next * k_i_next)
        elif e.type is ChangeType.II:
            delta = -old_value(e.row, alpha) / k_alpha_next
        elif e.type is ChangeType.III:
            k_beta = g_before.item_degree(e.col)
            delta = 1.0 / (k_beta * k_i_next)
        else:
            k_beta = g_before.item_degree(e.col)
            delta = -1.0 / (k_beta * k_i * k_i_next)
        filled.append(LedgerEntry(e.row, e.col, e.type, delta))
    return ChangeLedger(filled)


def _diagonal_after_add(g_before: BipartiteGraph, ctx: _AddContext, beta: int) -> float:
    """加邊後的 m_ββ，直接依鄰居重算（β = α 或 β ∈ Γ_i）。"""
    k_i_next = ctx.k_user + 1
    acc = 0.0
    if beta < g_before.n_items:
        for j in g_before.neighbors_of_item(beta):
            if j == ctx.user:
                continue
            acc += 1.0 / g_before.user_degree(j)
    acc += 1.0 / k_i_next
    k_beta = (ctx.k_item + 1) if beta == ctx.item else g_before.item_degree(beta)
    return acc / k_beta


def apply_add(
    m: DensePropMatrix,
    g_before: BipartiteGraph,
    user_label: str,
    item_label: str,
) -> DensePropMatrix:
    """就地把 M^{(l)} 更新成 M^{(l+1)}。圖本身不在這裡變動，由呼叫端負責。"""
    ctx = _add_context(g_before, user_label, item_label)
    if not ctx.new_user and not ctx.new_item and g_before.has_edge(ctx.user, ctx.item):
        return m

    ledger = compute_deltas(m, g_before, user_label, item_label)
    # 新物品：先補一列一欄零
    m.grow(max(g_before.n_items, ctx.item + 1))

    if ledger.entries:
        rows = np.fromiter((e.row for e in ledger.entries), dtype=np.int64, count=len(ledger))
        cols = np.fromiter((e.col for e in ledger.entries), dtype=np.int64, count=len(ledger))
        deltas = np.fromiter((e.delta for e in ledger.entries), dtype=np.float64, count=len(ledger))
        np.add.at(m.values, (rows, cols), deltas)

    m.values[ctx.item, ctx.item] = _diagonal_after_add(g_before, ctx, ctx.item)
    for beta in ctx.profile:
        m.values[beta, beta] = _diagonal_after_add(g_before, ctx, beta)
    m.edge_count = g_before.edge_count + 1
    return m


def apply_remove(
    m: DensePropMatrix,
    g_before: BipartiteGraph,
    user_label: str,
    item_label: str,
) -> DensePropMatrix:
    """刪邊：在刪除後的圖上重算第 α 欄、第 α 列與 Γ_i×Γ_i 區塊。"""
    if not g_before.has_edge_labels(user_label, item_label):
        raise MissingEdgeError(f"邊不存在: ({user_label!r}, {item_label!r})")
    g_after = g_before.copy()
    outcome = g_after.remove_edge(user_label, item_label)
    alpha = outcome.item

    m.values[:, alpha] = 0.0
    for row, value in md_from_item(g_after, alpha).values.items():
        m.values[row, alpha] = value
    m.values[alpha, :] = 0.0
    for col, value in hc_from_item(g_after, alpha).values.items():
        m.values[alpha, col] = value

    profile = g_after.neighbors_of_user(outcome.user)
    for beta in profile:
        column = md_from_item(g_after, beta)
        for mu in profile:
            m.values[mu, beta] = column.get(mu)
    m.edge_count = g_after.edge_count
    return m


def recompute_bruteforce(g: BipartiteGraph, cap: int = DEFAULT_DENSE_ITEM_CAP) -> DensePropMatrix:
    """直接套 m_{αβ} = (1/k_β) Σ_i a_{iα} a_{iβ} / k_i，整張重算。"""
    check_dense_cap(g.n_items, cap)
    n_users, n_items = g.n_users, g.n_items
    if n_items == 0:
        return DensePropMatrix.zeros(0, g.edge_count)
    a = np.zeros((n_users, n_items), dtype=np.float64)
    for u, item in g.edges():
        a[u, item] = 1.0
    k_user = a.sum(axis=1)
    k_item = a.sum(axis=0)
    inv_user = np.divide(1.0, k_user, out=np.zeros_like(k_user), where=k_user > 0)
    inv_item = np.divide(1.0, k_item, out=np.zeros_like(k_item), where=k_item > 0)
    co = a.T @ (a * inv_user[:, None])
    return DensePropMatrix(co * inv_item[None, :], g.edge_count)


class ExactOracle:
    """自帶圖與稠密 M 的精確增量引擎（驗證用）。"""

    def __init__(self, cap: int = DEFAULT_DENSE_ITEM_CAP):
        self.cap = cap
        self.graph = BipartiteGraph()
        self.matrix = DensePropMatrix.zeros(0)

    @classmethod
    def from_graph(cls, g: BipartiteGraph, cap: int = DEFAULT_DENSE_ITEM_CAP) -> "ExactOracle":
        oracle = cls(cap)
        oracle.graph = g.copy()
        oracle.matrix = recompute_bruteforce(oracle.graph, cap)
        return oracle

    def compute_deltas(self, event: EdgeEvent) -> ChangeLedger:
        return compute_deltas(self.matrix, self.graph, event.user, event.item)

    def apply_event(self, event: EdgeEvent) -> EdgeOutcome:
        if event.op is EdgeOp.REMOVE:
            apply_remove(self.matrix, self.graph, event.user, event.item)
            return self.graph.remove_edge(event.user, event.item)
        check_dense_cap(self.graph.items.peek_index(event.item) + 1, self.cap)
        apply_add(self.matrix, self.graph, event.user, event.item)
        return self.graph.add_edge(event.user, event.item, event.timestamp)
