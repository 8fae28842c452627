import numpy as np
import pytest

from diffusion_rec.diffusion.kernels import ScoreVector, recommend_top_k
from diffusion_rec.eval.metrics import (
    SplitSpec,
    UserEvalSets,
    auc_user,
    auc_user_sampled,
    precision_recall_user,
    round_scores,
    split_edges,
)
from diffusion_rec.graph.bipartite import EdgeEvent, EdgeOp


def _events(n: int) -> list[EdgeEvent]:
    # 時間戳刻意倒序，確認訓練集會重新排序
    return [EdgeEvent(f"u{k % 7}", f"i{k}", n - k) for k in range(n)]


# ============================================================
# 切分
# ============================================================
def test_split_sizes_and_partition():
    events = _events(100)
    train, test = split_edges(events, SplitSpec(0.10, rng_seed=3))
    assert len(test) == 10 and len(train) == 90
    assert set(train) | set(test) == set(events)
    assert not set(train) & set(test)


def test_split_tiny_fraction_keeps_one_test_edge():
    train, test = split_edges(_events(10), SplitSpec(0.01))
    assert len(test) == 1 and len(train) == 9


def test_split_is_deterministic_and_train_time_sorted():
    events = _events(50)
    first = split_edges(events, SplitSpec(0.2, rng_seed=9))
    second = split_edges(events, SplitSpec(0.2, rng_seed=9))
    assert first == second
    stamps = [e.timestamp for e in first[0]]
    assert stamps == sorted(stamps)


def test_split_rejects_bad_fraction_and_removes():
    with pytest.raises(ValueError):
        SplitSpec(1.5)
    with pytest.raises(ValueError):
        SplitSpec(0.0)
    with pytest.raises(ValueError):
        split_edges([EdgeEvent("u", "i", op=EdgeOp.REMOVE)], SplitSpec())


def test_split_empty_stream():
    assert split_edges([], SplitSpec()) == ([], [])


# ============================================================
# 評估集合
# ============================================================
def test_eval_sets_are_disjoint():
    sets = UserEvalSets.build(collected=[0, 2], test=[2, 3, 9], n_items=5)
    assert sets.collected.tolist() == [0, 2]
    # 2 已收藏、9 超出目前物品宇集
    assert sets.test.tolist() == [3]
    assert sets.others.tolist() == [1, 4]
    assert sets.eligible


def test_eval_sets_not_eligible_without_test_items():
    assert not UserEvalSets.build([0], [], 3).eligible
    assert not UserEvalSets.build([], [1], 3).eligible
    assert not UserEvalSets.build([0], [1], 2).eligible


# ============================================================
# AUC
# ============================================================
def test_auc_perfect_separation():
    # x=0 在 T，y=1、z=2 在 F
    sets = UserEvalSets(np.array([0]), np.array([3]), np.array([1, 2]))
    assert auc_user(np.array([0.9, 0.4, 0.1, 0.0]), sets) == 1.0


def test_auc_tie_counts_half():
    sets = UserEvalSets(np.array([0]), np.array([2]), np.array([1]))
    assert auc_user(np.array([0.5, 0.5, 1.0]), sets) == 0.5


def test_auc_ignores_last_bit_rounding_differences():
    sets = UserEvalSets(np.array([0]), np.array([1]), np.array([2]))
    # 0.1 + 0.2 與 0.3 只差最後一個位元，視為同分
    assert auc_user(np.array([1.0, 0.3, 0.1 + 0.2]), sets) == 0.5
    assert auc_user(np.array([1.0, 0.1 + 0.2, 0.3]), sets) == 0.5
    np.testing.assert_array_equal(round_scores(np.array([0.1 + 0.2])), [0.3])


def test_auc_accepts_score_vector_and_handles_empty():
    sets = UserEvalSets(np.array([1]), np.array([0]), np.array([2]))
    scores = ScoreVector(0, np.array([0.0, 0.2, 0.3]), 0)
    assert auc_user(scores, sets) == 0.0
    empty = UserEvalSets(np.array([], dtype=np.int64), np.array([0]), np.array([1, 2]))
    assert auc_user(scores, empty) is None


def test_auc_matches_pairwise_definition(rng):
    scores = rng.integers(0, 5, size=40).astype(float)
    sets = UserEvalSets.build(collected=range(5), test=range(5, 15), n_items=40)
    s_t = scores[sets.test][:, None]
    s_f = scores[sets.others][None, :]
    expected = ((s_t > s_f).sum() + 0.5 * (s_t == s_f).sum()) / (s_t.size * s_f.size)
    assert auc_user(scores, sets) == pytest.approx(expected, abs=1e-15)


def test_random_scores_average_to_one_half():
    gen = np.random.default_rng(2024)
    sets = UserEvalSets.build(collected=range(10), test=range(10, 20), n_items=220)
    values = [auc_user(gen.random(220), sets) for _ in range(1000)]
    assert np.mean(values) == pytest.approx(0.5, abs=0.02)


def test_sampled_auc_converges_to_exact(rng):
    scores = rng.random(300)
    sets = UserEvalSets.build(collected=range(20), test=range(20, 60), n_items=300)
    exact = auc_user(scores, sets)
    sampled = auc_user_sampled(scores, sets, 200_000, np.random.default_rng(5))
    assert sampled == pytest.approx(exact, abs=0.01)
    empty = UserEvalSets.build([0], [], 5)
    assert auc_user_sampled(scores, empty, 10, np.random.default_rng(0)) is None


def test_metrics_invariant_under_increasing_transform(rng):
    raw = rng.integers(0, 6, size=60)
    sets = UserEvalSets.build(collected=range(6), test=range(6, 16), n_items=60)
    base = ScoreVector(0, raw.astype(float), 0)
    warped = ScoreVector(0, np.exp(raw.astype(float)) + 3.0 * raw, 0)
    assert auc_user(base, sets) == auc_user(warped, sets)
    ranked_base = recommend_top_k(base, sets.collected, 10)
    ranked_warped = recommend_top_k(warped, sets.collected, 10)
    assert ranked_base == ranked_warped
    assert precision_recall_user(ranked_base, sets, 10) == precision_recall_user(ranked_warped, sets, 10)


# ============================================================
# Precision / Recall
# ============================================================
def test_precision_recall_direct_count():
    # T = {c, d}，排名 [c, e]
    sets = UserEvalSets(np.array([2, 3]), np.array([0]), np.array([1, 4]))
    assert precision_recall_user([2, 4], sets, 2) == (0.5, 0.5)


def test_precision_recall_all_hits():
    sets = UserEvalSets(np.array([1, 2, 3, 4]), np.array([0]), np.array([5]))
    assert precision_recall_user([3, 1], sets, 2) == (1.0, 0.5)


def test_precision_recall_undefined_and_invalid_k():
    sets = UserEvalSets(np.array([], dtype=np.int64), np.array([0]), np.array([1]))
    assert precision_recall_user([1], sets, 1) is None
    with pytest.raises(ValueError):
        precision_recall_user([1], sets, 0)


def test_precision_uses_k_even_when_list_is_short():
    sets = UserEvalSets(np.array([1]), np.array([0]), np.array([2]))
    assert precision_recall_user([1, 2], sets, 5) == (0.2, 1.0)
