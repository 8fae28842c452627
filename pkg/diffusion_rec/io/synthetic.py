"""合成稀疏串流（書籤類資料的替身）

- 每個物品先保證至少一條邊，其餘邊依 Zipf 型熱門度抽物品、均勻抽使用者
- 全部邊打散後給遞增的時間戳，標籤為 u{k} / i{k}
- 固定 seed → 完全相同的事件序列
"""

from __future__ import annotations

import numpy as np

from diffusion_rec.errors import ConfigError
from diffusion_rec.graph.bipartite import EdgeEvent, EdgeOp

_MAX_DRAW_ROUNDS = 200


def generate_sparse_stream(
    n_users: int,
    n_items: int,
    avg_item_degree: float,
    seed: int = 0,
    skew: float = 1.0,
) -> list[EdgeEvent]:
    if n_users < 1 or n_items < 1:
        raise ConfigError("合成資料的使用者數與物品數必須 ≥ 1")
    if avg_item_degree < 1.0:
        raise ConfigError(f"平均物品度數必須 ≥ 1，收到 {avg_item_degree}")
    n_edges = int(round(n_items * avg_item_degree))
    if n_edges > n_users * n_items:
        raise ConfigError(f"要求 {n_edges} 條邊，超過完全二部圖的 {n_users * n_items} 條")

    rng = np.random.default_rng(seed)
    popularity = 1.0 / np.arange(1, n_items + 1, dtype=np.float64) ** skew
    popularity = popularity[rng.permutation(n_items)]
    popularity /= popularity.sum()

    edges: set[tuple[int, int]] = set()
    ordered: list[tuple[int, int]] = []
    for item, user in enumerate(rng.integers(0, n_users, size=n_items).tolist()):
        edges.add((user, item))
        ordered.append((user, item))

    for _ in range(_MAX_DRAW_ROUNDS):
        need = n_edges - len(ordered)
        if need <= 0:
            break
        users = rng.integers(0, n_users, size=need * 2)
        items = rng.choice(n_items, size=need * 2, p=popularity)
        for user, item in zip(users.tolist(), items.tolist()):
            if (user, item) in edges:
                continue
            edges.add((user, item))
            ordered.append((user, item))
            if len(ordered) == n_edges:
                break
    if len(ordered) < n_edges:
        raise ConfigError(f"熱門度太集中，只抽到 {len(ordered)}/{n_edges} 條不重複的邊")

    order = rng.permutation(len(ordered))
    return [
        EdgeEvent(f"u{ordered[k][0]}", f"i{ordered[k][1]}", ts, EdgeOp.ADD)
        for ts, k in enumerate(order.tolist(), start=1)
    ]
