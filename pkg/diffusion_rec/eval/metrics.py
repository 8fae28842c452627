"""評估指標：AUC、Precision@K、Recall@K，以及訓練/測試切分。

所有指標都是「個人」指標；系統指標 = 合格使用者的平均。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from diffusion_rec.diffusion.kernels import ScoreVector
from diffusion_rec.graph.bipartite import EdgeEvent, EdgeOp

# 比較分數前先四捨五入；不同引擎的浮點捨入誤差不應改變同分判定
SCORE_DECIMALS = 12


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.10
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction 必須介於 0 與 1 之間，收到 {self.test_fraction}")


def split_edges(events: Sequence[EdgeEvent], spec: SplitSpec) -> tuple[list[EdgeEvent], list[EdgeEvent]]:
    """隨機切出測試集（整個串流固定不變）；訓練集依 (timestamp, 輸入順序) 排序。

    測試集大小 = max(1, round(fraction × 總數))。
    """
    if any(e.op is not EdgeOp.ADD for e in events):
        raise ValueError("split_edges 只接受新增事件")
    n = len(events)
    if n == 0:
        return [], []
    n_test = min(n, max(1, int(round(spec.test_fraction * n))))
    rng = np.random.default_rng(spec.rng_seed)
    is_test = np.zeros(n, dtype=bool)
    is_test[rng.permutation(n)[:n_test]] = True
    test = [e for e, flag in zip(events, is_test) if flag]
    train = sorted((e for e, flag in zip(events, is_test) if not flag), key=lambda e: e.timestamp)
    return train, test


@dataclass(frozen=True)
class UserEvalSets:
    """T_i：測試物品；Γ_i：已收藏；F_i：候選宇集 − Γ_i − T_i。皆為排序後的內部索引。"""

    test: np.ndarray
    collected: np.ndarray
    others: np.ndarray

    @classmethod
    def build(cls, collected: Sequence[int], test: Sequence[int], n_items: int) -> "UserEvalSets":
        collected_arr = np.unique(np.asarray(collected, dtype=np.int64))
        test_arr = np.unique(np.asarray(test, dtype=np.int64))
        test_arr = test_arr[(test_arr >= 0) & (test_arr < n_items)]
        test_arr = np.setdiff1d(test_arr, collected_arr, assume_unique=True)
        mask = np.ones(n_items, dtype=bool)
        mask[collected_arr] = False
        mask[test_arr] = False
        return cls(test_arr, collected_arr, np.flatnonzero(mask))

    @property
    def eligible(self) -> bool:
        return len(self.collected) > 0 and len(self.test) > 0 and len(self.others) > 0


def round_scores(values: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(values, dtype=np.float64), SCORE_DECIMALS)


def _values(scores: ScoreVector | np.ndarray) -> np.ndarray:
    return round_scores(scores.values if isinstance(scores, ScoreVector) else scores)


def auc_user(scores: ScoreVector | np.ndarray, sets: UserEvalSets) -> float | None:
    """(#{s_t > s_f} + 0.5·#{s_t = s_f}) / (|T|·|F|)；T 或 F 為空時回傳 None。"""
    if len(sets.test) == 0 or len(sets.others) == 0:
        return None
    values = _values(scores)
    s_test = values[sets.test]
    s_other = np.sort(values[sets.others])
    below = np.searchsorted(s_other, s_test, side="left")
    upto = np.searchsorted(s_other, s_test, side="right")
    wins = below.sum() + 0.5 * (upto - below).sum()
    return float(wins) / (len(s_test) * len(s_other))


def auc_user_sampled(
    scores: ScoreVector | np.ndarray,
    sets: UserEvalSets,
    n_samples: int,
    rng: np.random.Generator,
) -> float | None:
    """抽樣版 AUC：隨機抽 (t, f) 配對比較，同分記 0.5。"""
    if len(sets.test) == 0 or len(sets.others) == 0:
        return None
    values = _values(scores)
    s_t = values[rng.choice(sets.test, size=n_samples)]
    s_f = values[rng.choice(sets.others, size=n_samples)]
    return float(((s_t > s_f).sum() + 0.5 * (s_t == s_f).sum()) / n_samples)


def precision_recall_user(ranked: Sequence[int], sets: UserEvalSets, k: int) -> tuple[float, float] | None:
    """precision = 命中/K，recall = 命中/|T|；|T| = 0 時回傳 None。"""
    if k < 1:
        raise ValueError(f"K 必須 ≥ 1，收到 {k}")
    if len(sets.test) == 0:
        return None
    hits = int(np.isin(np.asarray(ranked[:k], dtype=np.int64), sets.test).sum())
    return hits / k, hits / len(sets.test)
