"""AAF / AAS 自適應引擎

M 以「欄」為單位稀疏保存（只存非零值）：columns[α] = {β: m_{βα}}。

每來一條邊 (i, α)：
- AAF：先改圖，再從 α 做一次 MD，整欄取代第 α 欄（Type I、II 精確）
- AAS：AAF 之後再從 α 做一次 HC，結果散寫回各欄的第 α 列（Type III 也精確）

只剩 Type IV（Γ_i×Γ_i 交叉項）會留下舊值；單次誤差 = 1/(k_β^{(l+1)} k_i^{(l)} k_i^{(l+1)})。
一次事件的成本只和 Σ_{j∈usersOfItem(α)} k_j 有關，與 |I|、|U| 無關。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp

from diffusion_rec.diffusion.dense import DensePropMatrix
from diffusion_rec.diffusion.kernels import ScoreVector, hc_from_item, md_from_item, score_user
from diffusion_rec.errors import DimensionMismatchError
from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent, EdgeOp, EdgeOutcome
from diffusion_rec.oracle.exact_update import ChangeLedger, ChangeType

DEFAULT_ERROR_TOL = 1e-12


class Algorithm(str, Enum):
    AAF = "aaf"
    AAS = "aas"


class WarmStart(str, Enum):
    EXACT_INIT = "exact-init"
    REPLAY = "replay"


@dataclass
class SparseColumnStore:
    algorithm: Algorithm
    columns: dict[int, dict[int, float]] = field(default_factory=dict)
    edge_count: int = 0
    # 單一事件更新累計寫入（含刪除）的項目數；不進快照、不參與比較
    writes: int = field(default=0, compare=False)

    def iter_column(self, beta: int) -> Iterator[tuple[int, float]]:
        return iter(self.columns.get(beta, {}).items())

    def column(self, beta: int) -> dict[int, float]:
        return dict(self.columns.get(beta, {}))

    def entry(self, row: int, col: int) -> float:
        return self.columns.get(col, {}).get(row, 0.0)

    @property
    def nnz(self) -> int:
        return sum(len(c) for c in self.columns.values())

    def max_index(self) -> int:
        """儲存中出現過的最大物品索引；空儲存回傳 -1。"""
        top = -1
        for beta, col in self.columns.items():
            top = max(top, beta, max(col) if col else -1)
        return top

    def to_dense(self, n_items: int) -> np.ndarray:
        out = np.zeros((n_items, n_items), dtype=np.float64)
        for beta, col in self.columns.items():
            for alpha, value in col.items():
                out[alpha, beta] = value
        return out

    def to_csc(self, n_items: int) -> sp.csc_matrix:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for beta in range(n_items):
            col = self.columns.get(beta)
            if col:
                indices.extend(col.keys())
                data.extend(col.values())
            indptr.append(len(indices))
        mat = sp.csc_matrix(
            (
                np.asarray(data, dtype=np.float64),
                np.asarray(indices, dtype=np.int64),
                np.asarray(indptr, dtype=np.int64),
            ),
            shape=(n_items, n_items),
        )
        mat.sort_indices()
        return mat

    def copy(self) -> "SparseColumnStore":
        return SparseColumnStore(
            self.algorithm,
            {beta: dict(col) for beta, col in self.columns.items()},
            self.edge_count,
        )

    def to_state(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "edge_count": self.edge_count,
            "columns": [
                [beta, list(col.keys()), list(col.values())]
                for beta, col in self.columns.items()
            ],
        }

    @classmethod
    def from_state(cls, state: dict) -> "SparseColumnStore":
        columns = {
            int(beta): dict(zip(keys, values))
            for beta, keys, values in state["columns"]
        }
        return cls(Algorithm(state["algorithm"]), columns, int(state["edge_count"]))


class TransposedColumns:
    """HC 讀法：H 的第 β 欄 = M 的第 β 列，要掃過所有欄收集。桌面規模使用。"""

    def __init__(self, store: SparseColumnStore):
        self.store = store

    def iter_column(self, beta: int) -> Iterator[tuple[int, float]]:
        for alpha, col in self.store.columns.items():
            value = col.get(beta)
            if value:
                yield alpha, value


# ============================================================
# 單一事件更新
# ============================================================
def _refresh_column(store: SparseColumnStore, g: BipartiteGraph, alpha: int) -> None:
    values = md_from_item(g, alpha).values
    store.writes += max(len(values), 1)
    if values:
        store.columns[alpha] = values
    else:
        store.columns.pop(alpha, None)


def _refresh_row(
    store: SparseColumnStore,
    g: BipartiteGraph,
    alpha: int,
    stale_candidates: Iterable[int] = (),
) -> None:
    """用 HC 結果取代第 α 列；離開 HC 支撐集的舊值刪除。"""
    row = hc_from_item(g, alpha).values
    for beta, value in row.items():
        store.columns.setdefault(beta, {})[alpha] = value
    store.writes += len(row)
    for beta in stale_candidates:
        if beta in row:
            continue
        col = store.columns.get(beta)
        if col is None or alpha not in col:
            continue
        del col[alpha]
        store.writes += 1
        if not col:
            del store.columns[beta]


def apply_event_aaf(store: SparseColumnStore, g: BipartiteGraph, event: EdgeEvent) -> EdgeOutcome:
    """先改圖，再整欄重算第 α 欄。重複新增時 store 不動；刪除不存在的邊會丟 MissingEdgeError。"""
    outcome = g.apply_event(event)
    if outcome.duplicate:
        return outcome
    _refresh_column(store, g, outcome.item)
    store.edge_count = g.edge_count
    return outcome


def apply_event_aas(store: SparseColumnStore, g: BipartiteGraph, event: EdgeEvent) -> EdgeOutcome:
    outcome = apply_event_aaf(store, g, event)
    if outcome.duplicate:
        return outcome
    stale: Iterable[int] = ()
    if event.op is EdgeOp.REMOVE:
        stale = list(g.neighbors_of_user(outcome.user))
    _refresh_row(store, g, outcome.item, stale)
    return outcome


def bulk_initialize(store: SparseColumnStore, g: BipartiteGraph) -> None:
    """每個 k_α ≥ 1 的物品都做一次 MD，store 對 g 完全精確。"""
    store.columns = {}
    for alpha in range(g.n_items):
        if g.item_degree(alpha) > 0:
            store.columns[alpha] = md_from_item(g, alpha).values
    store.edge_count = g.edge_count


def store_from_dense(m: DensePropMatrix, algorithm: Algorithm) -> SparseColumnStore:
    store = SparseColumnStore(algorithm, edge_count=m.edge_count)
    for beta in range(m.n_items):
        col = dict(m.iter_column(beta))
        if col:
            store.columns[beta] = col
    return store


def score(store: SparseColumnStore, g: BipartiteGraph, user: int) -> ScoreVector:
    return score_user(store, g, user)


# ============================================================
# 誤差帳
# ============================================================
@dataclass(frozen=True)
class ErrorPosition:
    row: int
    col: int
    error: float  # store − oracle
    type: ChangeType | None = None


@dataclass
class ErrorReport:
    max_abs_error: float
    positions: list[ErrorPosition]
    edge_count: int

    def position_set(self) -> set[tuple[int, int]]:
        return {(p.row, p.col) for p in self.positions}


def error_report(
    store: SparseColumnStore,
    oracle_matrix: DensePropMatrix,
    ledger: ChangeLedger | None = None,
    tol: float = DEFAULT_ERROR_TOL,
    include_diagonal: bool = False,
) -> ErrorReport:
    """逐項比對 store 與 oracle；|差| ≤ tol 視為精確。對角線預設不列入（排序從不讀它）。"""
    n = oracle_matrix.n_items
    if store.max_index() >= n:
        raise DimensionMismatchError(f"store 含索引 {store.max_index()}，但 oracle 只有 {n} 個物品")
    diff = store.to_dense(n) - oracle_matrix.values
    magnitude = np.abs(diff)
    if not include_diagonal and n:
        np.fill_diagonal(magnitude, 0.0)
    hits = np.argwhere(magnitude > tol)
    types = ledger.by_position() if ledger is not None else {}
    positions = []
    for row, col in hits.tolist():
        entry = types.get((row, col))
        positions.append(ErrorPosition(row, col, float(diff[row, col]), entry.type if entry else None))
    max_err = float(magnitude[magnitude > tol].max()) if len(hits) else 0.0
    return ErrorReport(max_err, positions, oracle_matrix.edge_count)


# ============================================================
# 引擎外殼
# ============================================================
class AdaptiveEngine:
    """圖 + 稀疏欄儲存 + 演算法標籤。事件必須逐一串行套用。"""

    def __init__(self, algorithm: Algorithm, graph: BipartiteGraph | None = None):
        self.algorithm = Algorithm(algorithm)
        self.graph = graph if graph is not None else BipartiteGraph()
        self.store = SparseColumnStore(self.algorithm)
        self._csc_cache: tuple[int, int, sp.csc_matrix] | None = None

    @property
    def name(self) -> str:
        return self.algorithm.value

    def apply(self, event: EdgeEvent) -> EdgeOutcome:
        self._csc_cache = None
        if self.algorithm is Algorithm.AAS:
            return apply_event_aas(self.store, self.graph, event)
        return apply_event_aaf(self.store, self.graph, event)

    def warm_start(self, events: Iterable[EdgeEvent], mode: WarmStart | str = WarmStart.EXACT_INIT) -> None:
        mode = WarmStart(mode)
        if mode is WarmStart.REPLAY:
            for event in events:
                self.apply(event)
            return
        for event in events:
            self.graph.apply_event(event)
        bulk_initialize(self.store, self.graph)
        self._csc_cache = None

    def score(self, user_label: str) -> ScoreVector:
        return score(self.store, self.graph, self.graph.user_index(user_label))

    def propagation_matrix(self) -> sp.csc_matrix:
        """目前 store 的 CSC 形式（同一事件數內快取）。"""
        n = self.graph.n_items
        key = (self.graph.edge_count, n)
        if self._csc_cache is None or self._csc_cache[:2] != key:
            self._csc_cache = (*key, self.store.to_csc(n))
        return self._csc_cache[2]

    def to_state(self) -> dict:
        return {"graph": self.graph.to_state(), "store": self.store.to_state()}

    @classmethod
    def from_state(cls, state: dict) -> "AdaptiveEngine":
        store = SparseColumnStore.from_state(state["store"])
        engine = cls(store.algorithm, BipartiteGraph.from_state(state["graph"]))
        engine.store = store
        return engine
