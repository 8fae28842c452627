import numpy as np
import pytest

from diffusion_rec.adaptive.column_store import (
    AdaptiveEngine,
    Algorithm,
    SparseColumnStore,
    TransposedColumns,
    WarmStart,
    apply_event_aaf,
    apply_event_aas,
    bulk_initialize,
    error_report,
    score,
    store_from_dense,
)
from diffusion_rec.diffusion.kernels import LiveMDColumns, hc_from_item, hybrid_score, md_from_item, score_user
from diffusion_rec.errors import DimensionMismatchError, MissingEdgeError
from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent, EdgeOp
from diffusion_rec.oracle.exact_update import ChangeType, compute_deltas, recompute_bruteforce
from diffusion_rec.oracle.verify import random_event

TOL = 1e-12
A, B, C = 0, 1, 2


def _exact_store(g: BipartiteGraph, algorithm: Algorithm) -> SparseColumnStore:
    store = SparseColumnStore(algorithm)
    bulk_initialize(store, g)
    return store


def test_bulk_initialize_matches_oracle(g4):
    store = _exact_store(g4, Algorithm.AAF)
    report = error_report(store, recompute_bruteforce(g4), include_diagonal=True)
    assert report.max_abs_error == 0.0
    assert report.positions == []


def test_bulk_initialize_empty_graph_and_idempotent(g4):
    empty = _exact_store(BipartiteGraph(), Algorithm.AAS)
    assert empty.columns == {}
    store = _exact_store(g4, Algorithm.AAS)
    snapshot = store.copy().columns
    bulk_initialize(store, g4)
    assert store.columns == snapshot


def test_aaf_g4_plus_u2_a(g4, add_u2_a):
    store = _exact_store(g4, Algorithm.AAF)
    ledger = compute_deltas(recompute_bruteforce(g4), g4, "u2", "a")
    apply_event_aaf(store, g4, add_u2_a)
    assert store.column(A) == pytest.approx({A: 5 / 12, B: 5 / 12, C: 1 / 6}, abs=TOL)
    assert store.entry(A, B) == pytest.approx(1 / 4, abs=TOL)

    report = error_report(store, recompute_bruteforce(g4), ledger)
    errors = {(p.row, p.col): p for p in report.positions}
    assert set(errors) == {(A, B), (A, C), (C, B), (B, C)}
    assert abs(errors[(A, B)].error) == pytest.approx(1 / 6, abs=TOL)
    assert abs(errors[(C, B)].error) == pytest.approx(1 / 12, abs=TOL)
    assert errors[(A, C)].type is ChangeType.III
    assert errors[(B, C)].type is ChangeType.IV
    assert report.max_abs_error == pytest.approx(1 / 3, abs=TOL)
    assert max(errors.values(), key=lambda p: abs(p.error)).col == C


def test_aas_g4_plus_u2_a(g4, add_u2_a):
    store = _exact_store(g4, Algorithm.AAS)
    apply_event_aas(store, g4, add_u2_a)
    row_a = {beta: store.entry(A, beta) for beta in range(3)}
    assert row_a == pytest.approx({A: 5 / 12, B: 5 / 12, C: 1 / 3}, abs=TOL)
    assert store.column(A) == pytest.approx({A: 5 / 12, B: 5 / 12, C: 1 / 6}, abs=TOL)

    report = error_report(store, recompute_bruteforce(g4))
    assert report.position_set() == {(C, B), (B, C)}
    errors = {(p.row, p.col): abs(p.error) for p in report.positions}
    assert errors[(C, B)] == pytest.approx(1 / 12, abs=TOL)
    assert errors[(B, C)] == pytest.approx(1 / 6, abs=TOL)
    assert report.max_abs_error == pytest.approx(1 / 6, abs=TOL)


def test_aas_next_event_on_b_clears_residue(g4, add_u2_a):
    store = _exact_store(g4, Algorithm.AAS)
    apply_event_aas(store, g4, add_u2_a)
    apply_event_aas(store, g4, EdgeEvent("u3", "b", 6))
    assert error_report(store, recompute_bruteforce(g4)).max_abs_error == 0.0


def test_aas_remove_from_exact_g5(g5):
    store = _exact_store(g5, Algorithm.AAS)
    apply_event_aas(store, g5, EdgeEvent("u2", "a", op=EdgeOp.REMOVE))
    truth = recompute_bruteforce(g5)
    report = error_report(store, truth)
    assert report.position_set() == {(C, B), (B, C)}
    # row a 與 column a 精確；(a, c) 已離開 HC 支撐集而被刪除
    assert store.column(A) == pytest.approx({A: 1 / 2, B: 1 / 2}, abs=TOL)
    assert store.entry(A, C) == 0.0
    assert A not in store.columns[C]


def test_new_user_and_new_item_materializes_diagonal_only(g4):
    store = _exact_store(g4, Algorithm.AAS)
    before = store.copy().columns
    apply_event_aas(store, g4, EdgeEvent("u9", "z"))
    assert store.column(3) == {3: 1.0}
    assert {k: v for k, v in store.columns.items() if k != 3} == before


def test_duplicate_add_leaves_store_untouched(g4):
    store = _exact_store(g4, Algorithm.AAS)
    before = store.copy().columns
    outcome = apply_event_aas(store, g4, EdgeEvent("u1", "a"))
    assert outcome.duplicate
    assert store.columns == before


def test_missing_remove_raises(g4):
    store = _exact_store(g4, Algorithm.AAF)
    with pytest.raises(MissingEdgeError):
        apply_event_aaf(store, g4, EdgeEvent("u1", "c", op=EdgeOp.REMOVE))


def test_touched_row_and_column_exact_after_each_event(random_graphs, rng):
    g = random_graphs(1, seed=60, max_users=25, max_items=30)[0]
    store = _exact_store(g, Algorithm.AAS)
    for _ in range(80):
        event = random_event(rng, g, 30, 40)
        outcome = apply_event_aas(store, g, event)
        alpha = outcome.item
        expected_col = md_from_item(g, alpha).values
        expected_row = hc_from_item(g, alpha).values
        assert store.column(alpha) == pytest.approx(expected_col, abs=TOL)
        stored_row = {beta: col[alpha] for beta, col in store.columns.items() if alpha in col}
        assert stored_row == pytest.approx(expected_row, abs=TOL)


def test_single_event_aas_never_worse_than_aaf(random_graphs, rng):
    for g in random_graphs(8, seed=70, max_users=20, max_items=25):
        event = random_event(rng, g, 25, 30)
        reports = {}
        for algorithm, step in ((Algorithm.AAF, apply_event_aaf), (Algorithm.AAS, apply_event_aas)):
            graph = g.copy()
            store = _exact_store(graph, algorithm)
            step(store, graph, event)
            reports[algorithm] = error_report(store, recompute_bruteforce(graph))
        assert reports[Algorithm.AAS].max_abs_error <= reports[Algorithm.AAF].max_abs_error + TOL
        assert reports[Algorithm.AAS].position_set() <= reports[Algorithm.AAF].position_set()


def test_error_report_dimension_mismatch(g4):
    store = _exact_store(g4, Algorithm.AAF)
    small = recompute_bruteforce(g4)
    apply_event_aaf(store, g4, EdgeEvent("u1", "d"))
    with pytest.raises(DimensionMismatchError):
        error_report(store, small)


def test_score_exact_store_matches_static(g4):
    store = _exact_store(g4, Algorithm.AAS)
    np.testing.assert_allclose(score(store, g4, 0).values, [3 / 4, 1.0, 1 / 4], atol=TOL)


def test_store_from_dense_round_trip(g5):
    store = store_from_dense(recompute_bruteforce(g5), Algorithm.AAS)
    assert error_report(store, recompute_bruteforce(g5), include_diagonal=True).max_abs_error == 0.0
    np.testing.assert_allclose(store.to_csc(3).toarray(), store.to_dense(3), atol=0)


def test_transposed_columns_give_hc_scores(g4):
    store = _exact_store(g4, Algorithm.AAS)
    mixed = hybrid_score(store, TransposedColumns(store), g4, 0, 0.0).values
    np.testing.assert_allclose(mixed, [1.0, 3 / 4, 1 / 2], atol=TOL)


def test_engine_warm_start_modes(g4_events, add_u2_a):
    exact = AdaptiveEngine(Algorithm.AAS)
    exact.warm_start(g4_events, WarmStart.EXACT_INIT)
    replay = AdaptiveEngine(Algorithm.AAS)
    replay.warm_start(g4_events, "replay")
    truth = recompute_bruteforce(exact.graph)
    assert error_report(exact.store, truth).max_abs_error == 0.0
    assert replay.graph.edges() == exact.graph.edges()

    exact.apply(add_u2_a)
    assert exact.store.edge_count == 5
    np.testing.assert_allclose(
        exact.score("u1").values,
        score_user(exact.store, exact.graph, 0).values,
        atol=0,
    )
    assert exact.propagation_matrix().shape == (3, 3)


def test_engine_state_round_trip(g4_events, add_u2_a):
    engine = AdaptiveEngine(Algorithm.AAS)
    engine.warm_start(g4_events)
    engine.apply(add_u2_a)
    restored = AdaptiveEngine.from_state(engine.to_state())
    truth = recompute_bruteforce(engine.graph)
    assert restored.store.columns == engine.store.columns
    assert error_report(restored.store, truth).position_set() == error_report(engine.store, truth).position_set()
    np.testing.assert_array_equal(
        restored.propagation_matrix().toarray(), engine.propagation_matrix().toarray()
    )
    assert restored.name == "aas"


def test_live_md_columns_agree_with_store(random_graphs):
    g = random_graphs(1, seed=80)[0]
    store = _exact_store(g, Algorithm.AAF)
    for u in range(min(g.n_users, 10)):
        np.testing.assert_allclose(
            score(store, g, u).values,
            score_user(LiveMDColumns(g), g, u).values,
            atol=TOL,
        )


def test_write_counter_tracks_single_event_work(g4, add_u2_a):
    aaf = _exact_store(g4.copy(), Algorithm.AAF)
    aas = _exact_store(g4.copy(), Algorithm.AAS)
    assert aaf.writes == aas.writes == 0
    g_aaf, g_aas = g4.copy(), g4.copy()
    apply_event_aaf(aaf, g_aaf, add_u2_a)
    apply_event_aas(aas, g_aas, add_u2_a)
    # 第 a 欄 3 個值；AAS 另外散寫第 a 列 3 個值
    assert (aaf.writes, aas.writes) == (3, 6)
    apply_event_aas(aas, g_aas, add_u2_a)
    assert aas.writes == 6
    assert aas.copy() == aas
    assert "writes" not in aas.to_state()
