"""單一事件的更新成本：物品數加倍時，AAS 每條邊的寫入量 vs. static 整張重建的寫入量。

寫入量（store 的 writes 計數）是確定的，拿來判定；耗時只印出參考。
度數分布固定：物品熱門度均勻（skew=0）、使用者數 = 物品數 / 2。

用法：
    python experiments/update_cost.py --sizes 1000 2000 4000 --degree 3.8
"""

import argparse
import sys
import time

import pandas as pd

from diffusion_rec.adaptive.column_store import AdaptiveEngine, Algorithm, SparseColumnStore, bulk_initialize
from diffusion_rec.eval.engines import StaticEngine
from diffusion_rec.io.synthetic import generate_sparse_stream

GROWTH_LIMIT = 1.5
MIN_REBUILD_RATIO = 50.0


def measure_cost(n_items: int, degree: float, tail: int, seed: int) -> dict:
    events = generate_sparse_stream(n_items // 2, n_items, degree, seed=seed, skew=0.0)
    warm, stream = events[:-tail], events[-tail:]

    engine = AdaptiveEngine(Algorithm.AAS)
    engine.warm_start(warm)
    started = time.perf_counter()
    for event in stream:
        engine.apply(event)
    aas_us = (time.perf_counter() - started) / len(stream) * 1e6
    aas_writes = engine.store.writes / len(stream)

    rebuilt = SparseColumnStore(Algorithm.AAS)
    bulk_initialize(rebuilt, engine.graph)
    rebuild_us = StaticEngine(engine.graph.copy()).prepare() * 1e6
    return {
        "items": n_items,
        "edges": len(events),
        "aas_writes_per_event": round(aas_writes, 2),
        "rebuild_writes": rebuilt.nnz,
        "write_ratio": round(rebuilt.nnz / aas_writes, 1),
        "aas_us_per_event": round(aas_us, 2),
        "static_rebuild_us": round(rebuild_us, 1),
    }


def check_cost(table: pd.DataFrame) -> list[str]:
    """回傳不合格的項目；空清單代表通過。"""
    failures = []
    writes = table["aas_writes_per_event"]
    growth = writes.max() / writes.min()
    if growth > GROWTH_LIMIT:
        failures.append(f"物品數加倍後 AAS 單事件寫入量變為 {growth:.2f} 倍（上限 {GROWTH_LIMIT}）")
    for row in table.itertuples():
        if row.write_ratio < MIN_REBUILD_RATIO:
            failures.append(f"items={row.items}：整張重建只比單事件多 {row.write_ratio} 倍（至少 {MIN_REBUILD_RATIO}）")
    return failures


def main() -> int:
    parser = argparse.ArgumentParser(description="AAS 單事件成本與物品數無關的量測")
    parser.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 4000])
    parser.add_argument("--degree", type=float, default=3.8)
    parser.add_argument("--tail", type=int, default=1000, help="量測的最後幾條邊")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    table = pd.DataFrame([measure_cost(n, args.degree, args.tail, args.seed) for n in args.sizes])
    print(table.to_string(index=False))

    failures = check_cost(table)
    for message in failures:
        print(f"[X] {message}")
    if failures:
        return 1
    print("[OK] AAS 單事件寫入量與物品數無關，且遠低於整張重建")
    return 0


if __name__ == "__main__":
    sys.exit(main())
