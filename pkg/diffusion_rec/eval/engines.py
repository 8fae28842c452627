"""串流評估用的引擎：static / aaf / aas / random

每個引擎都自帶一張圖，逐事件串行更新；到檢查點時：
- prepare()：建好本檢查點的打分狀態，回傳花費秒數
- score_block(users)：一次替一批使用者算分（列 = 使用者，欄 = 物品）

大量使用者打分用 scipy.sparse 矩陣乘法；和逐人 f' = M f 在線性上完全相同。
"""

from __future__ import annotations

import logging
import time
from typing import Iterable, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from diffusion_rec.adaptive.column_store import AdaptiveEngine, Algorithm, WarmStart
from diffusion_rec.diffusion.dense import DEFAULT_DENSE_ITEM_CAP
from diffusion_rec.errors import ConfigError
from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent, EdgeOutcome
from diffusion_rec.oracle.exact_update import recompute_bruteforce

logger = logging.getLogger(__name__)

ALGORITHM_CHOICES = ("static", "aaf", "aas", "random")


class ScoringEngine(Protocol):
    name: str
    graph: BipartiteGraph

    def apply(self, event: EdgeEvent) -> EdgeOutcome: ...

    def warm_start(self, events: Iterable[EdgeEvent], mode: WarmStart | str = WarmStart.EXACT_INIT) -> None: ...

    def prepare(self) -> float: ...

    def score_block(self, users: Sequence[int]) -> np.ndarray: ...

    def to_state(self) -> dict: ...


def adjacency_csr(g: BipartiteGraph) -> sp.csr_matrix:
    """A（使用者 × 物品）。"""
    indptr = [0]
    indices: list[int] = []
    for u in range(g.n_users):
        indices.extend(g.neighbors_of_user(u))
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.ones(len(indices), dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(g.n_users, g.n_items),
    )


def profile_matrix(g: BipartiteGraph, users: Sequence[int]) -> sp.csr_matrix:
    """F^T：每列是一位使用者的初始資源 f_α = a_{iα}。"""
    return adjacency_csr(g)[np.asarray(users, dtype=np.int64)]


def _inverse(values: np.ndarray) -> np.ndarray:
    return np.divide(1.0, values, out=np.zeros_like(values, dtype=np.float64), where=values > 0)


def _mix(md: np.ndarray, hc: np.ndarray | None, lam: float | None) -> np.ndarray:
    if lam is None or hc is None:
        return md
    return lam * md + (1.0 - lam) * hc


class StaticEngine:
    """每個檢查點都從目前的圖整個重算（靜態演算法）。

    預設逐人擴散（稀疏連乘），記憶體只和邊數有關。dense=True 時改用稠密 M，
    僅供桌面規模對照；物品數超過 dense_cap 會退回逐人擴散並警告一次。
    """

    name = "static"

    def __init__(
        self,
        graph: BipartiteGraph | None = None,
        dense_cap: int = DEFAULT_DENSE_ITEM_CAP,
        lam: float | None = None,
        dense: bool = False,
    ):
        self.graph = graph if graph is not None else BipartiteGraph()
        self.dense_cap = dense_cap
        self.lam = lam
        self.dense = dense
        self._dense: np.ndarray | None = None
        self._factors: tuple[sp.csr_matrix, sp.dia_matrix, sp.dia_matrix] | None = None
        self._warned = False

    def apply(self, event: EdgeEvent) -> EdgeOutcome:
        return self.graph.apply_event(event)

    def warm_start(self, events: Iterable[EdgeEvent], mode: WarmStart | str = WarmStart.EXACT_INIT) -> None:
        for event in events:
            self.graph.apply_event(event)

    def _use_dense(self) -> bool:
        if not self.dense:
            return False
        if self.graph.n_items <= self.dense_cap:
            return True
        if not self._warned:
            logger.warning(
                "static 比較基準：物品數 %d 超過稠密上限 %d，改用逐人擴散",
                self.graph.n_items,
                self.dense_cap,
            )
            self._warned = True
        return False

    def prepare(self) -> float:
        started = time.perf_counter()
        self._dense = None
        self._factors = None
        if self._use_dense():
            self._dense = recompute_bruteforce(self.graph, self.dense_cap).values
        else:
            a = adjacency_csr(self.graph)
            inv_user = sp.diags(_inverse(np.asarray(a.sum(axis=1)).ravel()))
            inv_item = sp.diags(_inverse(np.asarray(a.sum(axis=0)).ravel()))
            self._factors = (a, inv_user, inv_item)
        return time.perf_counter() - started

    def score_block(self, users: Sequence[int]) -> np.ndarray:
        if self._dense is None and self._factors is None:
            self.prepare()
        if self._dense is not None:
            f_t = profile_matrix(self.graph, users)
            md = np.asarray(f_t @ self._dense.T)
            hc = np.asarray(f_t @ self._dense) if self.lam is not None else None
            return _mix(md, hc, self.lam)
        a, inv_user, inv_item = self._factors
        f_t = a[np.asarray(users, dtype=np.int64)]
        # f'^T = f^T M^T，M = A^T D_u A D_i
        md = (((f_t @ inv_item) @ a.T) @ inv_user @ a).toarray()
        hc = None
        if self.lam is not None:
            hc = ((((f_t @ a.T) @ inv_user) @ a) @ inv_item).toarray()
        return _mix(md, hc, self.lam)

    def to_state(self) -> dict:
        return {"graph": self.graph.to_state()}

    @classmethod
    def from_state(
        cls,
        state: dict,
        dense_cap: int = DEFAULT_DENSE_ITEM_CAP,
        lam: float | None = None,
        dense: bool = False,
    ) -> "StaticEngine":
        return cls(BipartiteGraph.from_state(state["graph"]), dense_cap, lam, dense)


class AdaptiveScoringEngine(AdaptiveEngine):
    """AAF/AAS 引擎加上批次打分；HC 分數直接讀 store 的轉置。"""

    def __init__(self, algorithm: Algorithm | str, graph: BipartiteGraph | None = None, lam: float | None = None):
        super().__init__(Algorithm(algorithm), graph)
        self.lam = lam

    def prepare(self) -> float:
        started = time.perf_counter()
        self.propagation_matrix()
        return time.perf_counter() - started

    def score_block(self, users: Sequence[int]) -> np.ndarray:
        f_t = profile_matrix(self.graph, users)
        w = self.propagation_matrix()
        md = (f_t @ w.T).toarray()
        hc = (f_t @ w).toarray() if self.lam is not None else None
        return _mix(md, hc, self.lam)

    @classmethod
    def from_state(cls, state: dict, lam: float | None = None) -> "AdaptiveScoringEngine":
        base = AdaptiveEngine.from_state(state)
        engine = cls(base.algorithm, base.graph, lam)
        engine.store = base.store
        return engine


class RandomEngine:
    """隨機打分基準（AUC ≈ 0.5）。亂數由 seed 與目前邊數決定。"""

    name = "random"

    def __init__(self, graph: BipartiteGraph | None = None, seed: int = 0):
        self.graph = graph if graph is not None else BipartiteGraph()
        self.seed = seed

    def apply(self, event: EdgeEvent) -> EdgeOutcome:
        return self.graph.apply_event(event)

    def warm_start(self, events: Iterable[EdgeEvent], mode: WarmStart | str = WarmStart.EXACT_INIT) -> None:
        for event in events:
            self.graph.apply_event(event)

    def prepare(self) -> float:
        return 0.0

    def score_block(self, users: Sequence[int]) -> np.ndarray:
        first = int(users[0]) if len(users) else 0
        rng = np.random.default_rng([self.seed, self.graph.edge_count, first])
        return rng.random((len(users), self.graph.n_items))

    def to_state(self) -> dict:
        return {"graph": self.graph.to_state(), "seed": self.seed}

    @classmethod
    def from_state(cls, state: dict) -> "RandomEngine":
        return cls(BipartiteGraph.from_state(state["graph"]), int(state["seed"]))


def make_engine(
    name: str,
    *,
    lam: float | None = None,
    dense_cap: int = DEFAULT_DENSE_ITEM_CAP,
    static_dense: bool = False,
    seed: int = 0,
) -> ScoringEngine:
    if name == "static":
        return StaticEngine(dense_cap=dense_cap, lam=lam, dense=static_dense)
    if name in ("aaf", "aas"):
        return AdaptiveScoringEngine(name, lam=lam)
    if name == "random":
        return RandomEngine(seed=seed)
    raise ConfigError(f"未知的演算法: {name!r}（可用：{', '.join(ALGORITHM_CHOICES)}）")


def engine_from_state(
    name: str,
    state: dict,
    *,
    lam: float | None = None,
    dense_cap: int = DEFAULT_DENSE_ITEM_CAP,
    static_dense: bool = False,
) -> ScoringEngine:
    if name == "static":
        return StaticEngine.from_state(state, dense_cap, lam, static_dense)
    if name in ("aaf", "aas"):
        return AdaptiveScoringEngine.from_state(state, lam)
    if name == "random":
        return RandomEngine.from_state(state)
    raise ConfigError(f"未知的演算法: {name!r}")
