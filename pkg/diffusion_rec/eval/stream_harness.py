"""串流回測：依時間順序逐條餵邊，每隔固定邊數在檢查點比較各引擎

流程：
1. 前 start_threshold 條訓練邊做暖機（exact-init 或 replay）
2. 之後逐條串行套用到每個引擎，並計時
3. 在 l = start_threshold + k·interval 時，對所有合格使用者算 AUC / P@K / R@K

合格使用者：Γ_i、T_i、F_i 皆非空。候選宇集 = 目前訓練圖中已註冊的物品。
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from diffusion_rec.adaptive.column_store import WarmStart
from diffusion_rec.diffusion.dense import DEFAULT_DENSE_ITEM_CAP
from diffusion_rec.diffusion.kernels import ScoreVector, recommend_top_k
from diffusion_rec.errors import ConfigError, GraphAuditError
from diffusion_rec.eval.engines import ScoringEngine, engine_from_state
from diffusion_rec.eval.metrics import UserEvalSets, auc_user, precision_recall_user, round_scores
from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StreamSettings:
    checkpoint_interval: int = 5000
    ks: tuple[int, ...] = (100, 300, 500)
    start_threshold: int = 5000
    warm_start: WarmStart = WarmStart.EXACT_INIT
    batch_users: int = 256
    timing: bool = True

    def __post_init__(self):
        if self.checkpoint_interval < 1 or self.start_threshold < 1 or self.batch_users < 1:
            raise ConfigError("checkpoint_interval / start_threshold / batch_users 必須為正整數")
        if not self.ks or min(self.ks) < 1:
            raise ConfigError(f"K 必須為正整數，收到 {self.ks}")
        object.__setattr__(self, "ks", tuple(sorted(set(self.ks))))
        object.__setattr__(self, "warm_start", WarmStart(self.warm_start))


@dataclass
class AlgorithmMetrics:
    auc: float
    precision: dict[int, float]
    recall: dict[int, float]
    users_evaluated: int
    users_excluded: int
    us_per_event: float


@dataclass
class CheckpointReport:
    edges_fed: int
    metrics: dict[str, AlgorithmMetrics] = field(default_factory=dict)


def checkpoint_positions(n_train: int, start_threshold: int, interval: int) -> list[int]:
    if start_threshold > n_train:
        return []
    return list(range(start_threshold, n_train + 1, interval))


def _group_test_items(test: Sequence[EdgeEvent]) -> dict[str, list[str]]:
    grouped: dict[str, list[str]] = {}
    for event in test:
        grouped.setdefault(event.user, []).append(event.item)
    return grouped


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan


class StreamRunner:
    """持有所有引擎與串流游標；可中途存成 state 再接續。"""

    def __init__(
        self,
        engines: Sequence[ScoringEngine],
        train: Sequence[EdgeEvent],
        test: Sequence[EdgeEvent],
        settings: StreamSettings | None = None,
    ):
        if not engines:
            raise ConfigError("至少需要一個演算法")
        names = [e.name for e in engines]
        if len(set(names)) != len(names):
            raise ConfigError(f"演算法重複: {names}")
        self.engines = list(engines)
        self.train = list(train)
        self.test_by_user = _group_test_items(test)
        self.settings = settings or StreamSettings()
        self.cursor = 0
        self.last_reported = 0
        self._elapsed = {e.name: 0.0 for e in self.engines}
        self._events_since = 0

    # ------------------------------------------------------------
    # 餵邊
    # ------------------------------------------------------------
    def _warm_start(self) -> None:
        warm = self.train[: self.settings.start_threshold]
        for engine in self.engines:
            engine.warm_start(warm, self.settings.warm_start)
        self.cursor = len(warm)
        logger.debug("暖機完成：%d 條邊，模式 %s", self.cursor, self.settings.warm_start.value)

    def _feed(self, target: int) -> None:
        while self.cursor < target:
            event = self.train[self.cursor]
            for engine in self.engines:
                started = time.perf_counter()
                engine.apply(event)
                self._elapsed[engine.name] += time.perf_counter() - started
            self.cursor += 1
            self._events_since += 1

    def run(self, until: int | None = None) -> list[CheckpointReport]:
        """跑到 until（預設整個訓練集），回傳這段期間新產生的檢查點。"""
        total = len(self.train)
        start = self.settings.start_threshold
        if start > total:
            logger.debug("start_threshold %d 大於訓練邊數 %d，不產生檢查點", start, total)
            return []
        stop = total if until is None else min(until, total)
        if self.cursor == 0:
            self._warm_start()

        reports: list[CheckpointReport] = []
        for position in checkpoint_positions(total, start, self.settings.checkpoint_interval):
            if position <= self.last_reported:
                continue
            if position > stop:
                break
            self._feed(position)
            reports.append(self.evaluate())
            self.last_reported = position
        self._feed(max(stop, self.cursor))
        return reports

    # ------------------------------------------------------------
    # 檢查點
    # ------------------------------------------------------------
    def _check_consistency(self) -> BipartiteGraph:
        reference = self.engines[0].graph
        for engine in self.engines:
            engine.graph.audit()
            g = engine.graph
            if (g.edge_count, g.n_users, g.n_items) != (reference.edge_count, reference.n_users, reference.n_items):
                raise GraphAuditError(
                    f"引擎 {engine.name} 的圖與 {self.engines[0].name} 不一致："
                    f"{g.edge_count}/{g.n_users}/{g.n_items} vs "
                    f"{reference.edge_count}/{reference.n_users}/{reference.n_items}"
                )
        return reference

    def _eval_sets(self, g: BipartiteGraph) -> tuple[list[int], list[UserEvalSets], int]:
        """合格使用者與其評估集合；不合格數 = (訓練圖中的使用者 ∪ 有測試邊的使用者) − 合格數。"""
        users: list[int] = []
        sets: list[UserEvalSets] = []
        population = set(g.users.labels()) | set(self.test_by_user)
        for label in sorted(self.test_by_user):
            if label not in g.users:
                continue
            u = g.users.index_of(label)
            test_idx = [g.items.index_of(item) for item in self.test_by_user[label] if item in g.items]
            user_sets = UserEvalSets.build(g.neighbors_of_user(u), test_idx, g.n_items)
            if not user_sets.eligible:
                continue
            users.append(u)
            sets.append(user_sets)
        return users, sets, len(population) - len(users)

    def _score_engine(self, engine: ScoringEngine, users: list[int], sets: list[UserEvalSets]):
        ks = self.settings.ks
        top_k = ks[-1]
        aucs: list[float] = []
        precision = {k: [] for k in ks}
        recall = {k: [] for k in ks}
        batch = self.settings.batch_users
        edge_count = engine.graph.edge_count
        for lo in range(0, len(users), batch):
            block_users = users[lo : lo + batch]
            block = round_scores(engine.score_block(block_users))
            for row, u, user_sets in zip(block, block_users, sets[lo : lo + batch]):
                aucs.append(auc_user(row, user_sets))
                ranked = recommend_top_k(ScoreVector(u, row, edge_count), user_sets.collected, top_k)
                for k in ks:
                    p, r = precision_recall_user(ranked, user_sets, k)
                    precision[k].append(p)
                    recall[k].append(r)
        return (
            _mean(aucs),
            {k: _mean(v) for k, v in precision.items()},
            {k: _mean(v) for k, v in recall.items()},
        )

    def evaluate(self) -> CheckpointReport:
        g = self._check_consistency()
        users, sets, excluded = self._eval_sets(g)
        report = CheckpointReport(edges_fed=self.cursor)
        for engine in self.engines:
            prepare_seconds = engine.prepare()
            auc, precision, recall = self._score_engine(engine, users, sets)
            if not self.settings.timing:
                us = 0.0
            elif engine.name == "static":
                us = prepare_seconds * 1e6
            elif self._events_since:
                us = self._elapsed[engine.name] / self._events_since * 1e6
            else:
                us = 0.0
            report.metrics[engine.name] = AlgorithmMetrics(auc, precision, recall, len(users), excluded, us)
            logger.debug("l=%d %s AUC=%.6f 使用者=%d", self.cursor, engine.name, auc, len(users))
        self._elapsed = {e.name: 0.0 for e in self.engines}
        self._events_since = 0
        return report

    # ------------------------------------------------------------
    # 快照
    # ------------------------------------------------------------
    def to_state(self) -> dict:
        return {
            "cursor": self.cursor,
            "last_reported": self.last_reported,
            "engines": [[e.name, e.to_state()] for e in self.engines],
        }

    @classmethod
    def from_state(
        cls,
        state: dict,
        train: Sequence[EdgeEvent],
        test: Sequence[EdgeEvent],
        settings: StreamSettings | None = None,
        *,
        lam: float | None = None,
        dense_cap: int = DEFAULT_DENSE_ITEM_CAP,
        static_dense: bool = False,
    ) -> "StreamRunner":
        engines = [
            engine_from_state(name, engine_state, lam=lam, dense_cap=dense_cap, static_dense=static_dense)
            for name, engine_state in state["engines"]
        ]
        runner = cls(engines, train, test, settings)
        runner.cursor = int(state["cursor"])
        runner.last_reported = int(state["last_reported"])
        if runner.cursor > len(runner.train):
            raise ConfigError(f"快照游標 {runner.cursor} 超過訓練邊數 {len(runner.train)}")
        return runner


def run_stream(
    engines: Sequence[ScoringEngine],
    train: Sequence[EdgeEvent],
    test: Sequence[EdgeEvent],
    checkpoint_interval: int = 5000,
    ks: Sequence[int] = (100, 300, 500),
    start_threshold: int = 5000,
    **settings,
) -> list[CheckpointReport]:
    config = StreamSettings(
        checkpoint_interval=checkpoint_interval,
        ks=tuple(ks),
        start_threshold=start_threshold,
        **settings,
    )
    return StreamRunner(engines, train, test, config).run()
