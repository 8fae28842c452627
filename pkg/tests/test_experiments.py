"""experiments/ 的判定規則；完整量測標為 slow。"""

import pandas as pd
import pytest

from experiments.non_accumulation import accumulation_verdict, auc_gaps
from experiments.update_cost import check_cost, measure_cost


def test_accumulation_verdict_compares_halves():
    assert accumulation_verdict([1e-4, 2e-4, 1e-4, 2.4e-4]) == (2e-4, 2.4e-4, True)
    assert accumulation_verdict([1e-4, 1e-4, 3e-4])[2] is False
    assert accumulation_verdict([0.0, 0.0, 0.0, 0.0])[2] is True
    first, second, ok = accumulation_verdict([float("nan"), 1e-4, 1e-4, 1e-4])
    assert (first, second, ok) == (1e-4, 1e-4, True)


def test_check_cost_flags_growth_and_small_ratio():
    flat = pd.DataFrame({"items": [1000, 2000], "aas_writes_per_event": [60.0, 62.0], "write_ratio": [500.0, 900.0]})
    assert check_cost(flat) == []
    growing = flat.assign(aas_writes_per_event=[60.0, 120.0])
    assert len(check_cost(growing)) == 1
    cheap_rebuild = flat.assign(write_ratio=[500.0, 10.0])
    assert len(check_cost(cheap_rebuild)) == 1


def test_measure_cost_counts_writes_small():
    row = measure_cost(200, 3.8, tail=100, seed=0)
    assert row["edges"] == 760
    assert row["aas_writes_per_event"] > 0
    assert row["rebuild_writes"] > row["aas_writes_per_event"]


@pytest.mark.slow
def test_update_cost_does_not_depend_on_item_count():
    table = pd.DataFrame([measure_cost(n, 3.8, tail=1000, seed=0) for n in (1000, 2000, 4000)])
    assert check_cost(table) == []


@pytest.mark.slow
def test_aas_gap_does_not_accumulate_on_sparse_stream():
    rows = auc_gaps(2000, 4000, 3.8, interval=1000, start=2000, seed=0)
    assert len(rows) >= 4
    gaps = [abs(aas - static) for _, static, aas in rows]
    first, second, ok = accumulation_verdict(gaps)
    assert ok, f"前半段最大 {first:.3e}，後半段最大 {second:.3e}"
