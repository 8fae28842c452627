"""共用 fixture：G4 / G5 小圖與隨機圖。

G4：u1 → {a, b}，u2 → {b, c}；物品索引 a=0, b=1, c=2。
G5：G4 再加上 (u2, a)。
"""

from __future__ import annotations

import numpy as np
import pytest

from diffusion_rec.graph.bipartite import BipartiteGraph, EdgeEvent
from diffusion_rec.oracle.verify import random_graph

A, B, C = 0, 1, 2

G4_EDGES = [("u1", "a"), ("u1", "b"), ("u2", "b"), ("u2", "c")]

G4_MATRIX = np.array(
    [
        [1 / 2, 1 / 4, 0.0],
        [1 / 2, 1 / 2, 1 / 2],
        [0.0, 1 / 4, 1 / 2],
    ]
)

G5_MATRIX = np.array(
    [
        [5 / 12, 5 / 12, 1 / 3],
        [5 / 12, 5 / 12, 1 / 3],
        [1 / 6, 1 / 6, 1 / 3],
    ]
)


def build_graph(edges) -> BipartiteGraph:
    g = BipartiteGraph()
    for user, item in edges:
        g.add_edge(user, item)
    return g


@pytest.fixture
def g4() -> BipartiteGraph:
    return build_graph(G4_EDGES)


@pytest.fixture
def g5() -> BipartiteGraph:
    return build_graph(G4_EDGES + [("u2", "a")])


@pytest.fixture
def g4_events() -> list[EdgeEvent]:
    return [EdgeEvent(u, i, ts) for ts, (u, i) in enumerate(G4_EDGES, start=1)]


@pytest.fixture
def add_u2_a() -> EdgeEvent:
    return EdgeEvent("u2", "a", 5)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def random_graphs():
    def make(n: int, seed: int = 7, max_users: int = 50, max_items: int = 80):
        gen = np.random.default_rng(seed)
        return [random_graph(gen, max_users, max_items) for _ in range(n)]

    return make


@pytest.fixture
def g4_matrix() -> np.ndarray:
    return G4_MATRIX.copy()


@pytest.fixture
def g5_matrix() -> np.ndarray:
    return G5_MATRIX.copy()
