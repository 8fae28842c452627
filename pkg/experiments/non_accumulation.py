"""AAS 誤差是否隨時間累積：合成稀疏串流上比較 |AUC_AAS − AUC_static| 前後半段的最大值。

用法：
    python experiments/non_accumulation.py --items 4000 --users 2000 --degree 3.8
"""

import argparse
import math
import sys

from diffusion_rec.eval.engines import StaticEngine, make_engine
from diffusion_rec.eval.metrics import SplitSpec, split_edges
from diffusion_rec.eval.stream_harness import StreamRunner, StreamSettings
from diffusion_rec.io.synthetic import generate_sparse_stream

RATIO_LIMIT = 1.25


def _running_max(values: list[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return max(finite, default=0.0)


def auc_gaps(users: int, items: int, degree: float, interval: int, start: int, seed: int) -> list[tuple[int, float, float]]:
    """每個檢查點的 (edges_fed, AUC_static, AUC_aas)。"""
    events = generate_sparse_stream(users, items, degree, seed=seed)
    train, test = split_edges(events, SplitSpec(0.10, seed))
    settings = StreamSettings(checkpoint_interval=interval, ks=(100,), start_threshold=start, timing=False)
    reports = StreamRunner([StaticEngine(), make_engine("aas")], train, test, settings).run()
    return [(r.edges_fed, r.metrics["static"].auc, r.metrics["aas"].auc) for r in reports]


def accumulation_verdict(gaps: list[float]) -> tuple[float, float, bool]:
    """(前半段最大, 後半段最大, 是否通過)；後半段不得超過前半段的 RATIO_LIMIT 倍。"""
    half = len(gaps) // 2
    first, second = _running_max(gaps[:half]), _running_max(gaps[half:])
    return first, second, second == 0.0 or second <= RATIO_LIMIT * first


def main() -> int:
    parser = argparse.ArgumentParser(description="AAS 誤差不累積檢查（書籤類稀疏串流）")
    parser.add_argument("--users", type=int, default=2000)
    parser.add_argument("--items", type=int, default=4000)
    parser.add_argument("--degree", type=float, default=3.8)
    parser.add_argument("--interval", type=int, default=1000)
    parser.add_argument("--start", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rows = auc_gaps(args.users, args.items, args.degree, args.interval, args.start, args.seed)
    if len(rows) < 2:
        print("[X] 檢查點不足兩個，請調低 --start 或 --interval")
        return 2

    gaps = [abs(aas - static) for _, static, aas in rows]
    for (edges_fed, static, aas), gap in zip(rows, gaps):
        print(f"l={edges_fed:>7}  AUC static={static:.6f}  aas={aas:.6f}  |Δ|={gap:.2e}")

    first, second, ok = accumulation_verdict(gaps)
    print(f"前半段最大 |Δ|：{first:.3e}")
    print(f"後半段最大 |Δ|：{second:.3e}")
    if ok:
        print("[OK] 誤差沒有隨串流累積")
        return 0
    print(f"[X] 後半段超過前半段的 {RATIO_LIMIT} 倍")
    return 1


if __name__ == "__main__":
    sys.exit(main())
