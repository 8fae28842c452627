"""oracle 與 adaptive 引擎的自我驗證（verify 子命令）

1. 隨機事件串流：ExactOracle 每步都和暴力重算比對
2. 單一事件稽核：從精確 store 出發套一個事件，AAF / AAS 的誤差位置與大小必須符合 ChangeLedger
   - AAS：只剩 Type IV，|誤差| = 1/(k_β k_i k_i')
   - AAF：Type III + Type IV
3. 隨機圖上的可逆性（HC 逐項 = M 的轉置）與守恆（每欄和為 1）
4. 串流誤差序列：同一串事件下 AAF / AAS 相對 oracle 的最大誤差（只回報）
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from diffusion_rec.adaptive.column_store import (
    DEFAULT_ERROR_TOL,
    Algorithm,
    AdaptiveEngine,
    ErrorReport,
    SparseColumnStore,
    apply_event_aaf,
    apply_event_aas,
    bulk_initialize,
    error_report,
)
from diffusion_rec.diffusion.kernels import build_dense_md, hc_from_item
from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent, EdgeOp
from diffusion_rec.oracle.exact_update import (
    ChangeLedger,
    ChangeType,
    ExactOracle,
    compute_deltas,
    recompute_bruteforce,
)

logger = logging.getLogger(__name__)


# ============================================================
# 隨機圖與事件
# ============================================================
def random_graph(
    rng: np.random.Generator,
    max_users: int = 50,
    max_items: int = 80,
    density: float | None = None,
) -> BipartiteGraph:
    n_users = int(rng.integers(2, max_users + 1))
    n_items = int(rng.integers(2, max_items + 1))
    p = density if density is not None else float(rng.uniform(0.03, 0.2))
    g = BipartiteGraph()
    for u in range(n_users):
        g.register_user(f"u{u}")
    for a in range(n_items):
        g.register_item(f"i{a}")
    mask = rng.random((n_users, n_items)) < p
    for u, a in zip(*np.nonzero(mask)):
        g.add_edge(f"u{u}", f"i{a}")
    return g


def random_event(
    rng: np.random.Generator,
    g: BipartiteGraph,
    max_users: int = 50,
    max_items: int = 80,
    remove_prob: float = 0.25,
    new_node_prob: float = 0.1,
) -> EdgeEvent:
    """隨機產生一個有效事件：刪除既有邊，或新增（可能帶新使用者 / 新物品）。"""
    if g.edge_count and rng.random() < remove_prob:
        edges = g.edges()
        u, a = edges[int(rng.integers(len(edges)))]
        return EdgeEvent(g.users.label_of(u), g.items.label_of(a), op=EdgeOp.REMOVE)
    for _ in range(100):
        if g.n_users < max_users and (g.n_users == 0 or rng.random() < new_node_prob):
            user = f"u{g.n_users}"
        else:
            user = g.users.label_of(int(rng.integers(g.n_users)))
        if g.n_items < max_items and (g.n_items == 0 or rng.random() < new_node_prob):
            item = f"i{g.n_items}"
        else:
            item = g.items.label_of(int(rng.integers(g.n_items)))
        if not g.has_edge_labels(user, item):
            return EdgeEvent(user, item)
    # 圖幾乎全滿：改成刪除
    edges = g.edges()
    u, a = edges[int(rng.integers(len(edges)))]
    return EdgeEvent(g.users.label_of(u), g.items.label_of(a), op=EdgeOp.REMOVE)


# ============================================================
# 單一事件稽核
# ============================================================
@dataclass
class SingleEventAudit:
    event: EdgeEvent
    aaf: ErrorReport
    aas: ErrorReport
    violations: list[str] = field(default_factory=list)


def _expected_add_positions(ledger: ChangeLedger, algorithm: Algorithm) -> set[tuple[int, int]]:
    stale = ledger.positions(ChangeType.IV)
    if algorithm is Algorithm.AAF:
        stale |= ledger.positions(ChangeType.III)
    return stale


def _expected_remove_positions(g_after: BipartiteGraph, user: int, item: int, algorithm: Algorithm) -> set[tuple[int, int]]:
    profile = g_after.neighbors_of_user(user)
    allowed = {(mu, beta) for mu in profile for beta in profile if mu != beta}
    if algorithm is Algorithm.AAF:
        allowed |= {(item, beta) for beta in range(g_after.n_items) if beta != item}
    return allowed


def audit_single_event(g: BipartiteGraph, event: EdgeEvent, tol: float = DEFAULT_ERROR_TOL) -> SingleEventAudit:
    """從對 g 完全精確的 store 出發套用 event，檢查誤差是否只落在預期位置、大小是否正確。g 不會被修改。"""
    ledger = None
    if event.op is EdgeOp.ADD:
        ledger = compute_deltas(recompute_bruteforce(g), g, event.user, event.item)

    reports: dict[Algorithm, ErrorReport] = {}
    violations: list[str] = []
    for algorithm, step in ((Algorithm.AAF, apply_event_aaf), (Algorithm.AAS, apply_event_aas)):
        graph = g.copy()
        store = SparseColumnStore(algorithm)
        bulk_initialize(store, graph)
        outcome = step(store, graph, event)
        truth = recompute_bruteforce(graph)
        report = error_report(store, truth, ledger, tol)
        reports[algorithm] = report
        found = report.position_set()

        if ledger is not None:
            expected = _expected_add_positions(ledger, algorithm)
            if found != expected:
                violations.append(
                    f"{algorithm.value} {event}: 誤差位置 {sorted(found ^ expected)} 與 ChangeLedger 不符"
                )
            deltas = ledger.by_position()
            for p in report.positions:
                entry = deltas.get((p.row, p.col))
                if entry is not None and abs(p.error + entry.delta) > tol:
                    violations.append(
                        f"{algorithm.value} {event}: ({p.row},{p.col}) 誤差 {p.error:.3e} ≠ −δ {-entry.delta:.3e}"
                    )
        else:
            allowed = _expected_remove_positions(graph, outcome.user, outcome.item, algorithm)
            outside = found - allowed
            if outside:
                violations.append(f"{algorithm.value} {event}: 刪邊後出現預期外的誤差位置 {sorted(outside)}")

    if reports[Algorithm.AAS].max_abs_error > reports[Algorithm.AAF].max_abs_error + tol:
        violations.append(
            f"{event}: AAS 最大誤差 {reports[Algorithm.AAS].max_abs_error:.3e} 大於 AAF "
            f"{reports[Algorithm.AAF].max_abs_error:.3e}"
        )
    return SingleEventAudit(event, reports[Algorithm.AAF], reports[Algorithm.AAS], violations)


# ============================================================
# 靜態性質
# ============================================================
def reversibility_deviation(g: BipartiteGraph) -> float:
    """獨立做 HC 得到的 M 第 α 列，與 MD 建出的 M 比較。"""
    m = build_dense_md(g, cap=max(g.n_items, 1))
    worst = 0.0
    for alpha in range(g.n_items):
        row = np.zeros(g.n_items)
        for beta, value in hc_from_item(g, alpha).values.items():
            row[beta] = value
        worst = max(worst, float(np.abs(row - m.values[alpha, :]).max(initial=0.0)))
    return worst


def conservation_deviation(g: BipartiteGraph) -> float:
    m = recompute_bruteforce(g, cap=max(g.n_items, 1))
    active = [a for a in range(g.n_items) if g.item_degree(a) > 0]
    if not active:
        return 0.0
    sums = m.values[:, active].sum(axis=0)
    return float(np.abs(sums - 1.0).max())


# ============================================================
# 總檢
# ============================================================
@dataclass
class VerificationSummary:
    events: int = 0
    oracle_max_deviation: float = 0.0
    audited_events: int = 0
    audit_aaf_max_error: float = 0.0
    audit_aas_max_error: float = 0.0
    graphs_checked: int = 0
    reversibility_max_deviation: float = 0.0
    conservation_max_deviation: float = 0.0
    stream_aaf_max_error: float = 0.0
    stream_aas_max_error: float = 0.0
    stream_dominance_violations: int = 0
    violations: list[str] = field(default_factory=list)
    tol: float = DEFAULT_ERROR_TOL

    @property
    def passed(self) -> bool:
        return (
            not self.violations
            and self.oracle_max_deviation <= self.tol
            and self.reversibility_max_deviation <= self.tol
            and self.conservation_max_deviation <= self.tol
        )


def verify_oracle(
    n_events: int = 200,
    max_users: int = 50,
    max_items: int = 80,
    seed: int = 0,
    tol: float = DEFAULT_ERROR_TOL,
    n_graphs: int = 100,
) -> VerificationSummary:
    rng = np.random.default_rng(seed)
    summary = VerificationSummary(tol=tol)

    start = random_graph(rng, max_users, max_items)
    oracle = ExactOracle.from_graph(start)
    aaf = AdaptiveEngine(Algorithm.AAF, start.copy())
    aas = AdaptiveEngine(Algorithm.AAS, start.copy())
    bulk_initialize(aaf.store, aaf.graph)
    bulk_initialize(aas.store, aas.graph)

    for step in range(n_events):
        event = random_event(rng, oracle.graph, max_users, max_items)

        audit = audit_single_event(oracle.graph, event, tol)
        summary.audited_events += 1
        summary.audit_aaf_max_error = max(summary.audit_aaf_max_error, audit.aaf.max_abs_error)
        summary.audit_aas_max_error = max(summary.audit_aas_max_error, audit.aas.max_abs_error)
        summary.violations.extend(audit.violations)

        oracle.apply_event(event)
        aaf.apply(event)
        aas.apply(event)
        truth = recompute_bruteforce(oracle.graph)
        deviation = float(np.abs(oracle.matrix.values - truth.values).max(initial=0.0))
        summary.oracle_max_deviation = max(summary.oracle_max_deviation, deviation)
        summary.events += 1

        aaf_err = error_report(aaf.store, truth, tol=tol).max_abs_error
        aas_err = error_report(aas.store, truth, tol=tol).max_abs_error
        summary.stream_aaf_max_error = max(summary.stream_aaf_max_error, aaf_err)
        summary.stream_aas_max_error = max(summary.stream_aas_max_error, aas_err)
        if aas_err > aaf_err + tol:
            summary.stream_dominance_violations += 1
        logger.debug("事件 %d %s：oracle 偏差 %.2e，AAF %.3e，AAS %.3e", step, event, deviation, aaf_err, aas_err)

    for _ in range(n_graphs):
        g = random_graph(rng, max_users, max_items)
        summary.graphs_checked += 1
        summary.reversibility_max_deviation = max(summary.reversibility_max_deviation, reversibility_deviation(g))
        summary.conservation_max_deviation = max(summary.conservation_max_deviation, conservation_deviation(g))

    return summary
