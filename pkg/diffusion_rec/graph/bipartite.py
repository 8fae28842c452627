"""動態二部圖（使用者–物品）

功能：
1. 外部標籤 ↔ 內部連續索引的雙向註冊表（只增不減，索引永不重用）
2. 雙向鄰接表：itemsOfUser / usersOfItem，皆以內部索引排序（bisect 插入）
3. 度數與邊數帳：k_i、k_α、l

單一寫入者；兩次變動之間的讀取可以並行。
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

from diffusion_rec.errors import GraphAuditError, MissingEdgeError, UnknownNodeError


class EdgeOp(str, Enum):
    ADD = "add"
    REMOVE = "remove"


@dataclass(frozen=True)
class EdgeEvent:
    """一個單位變動（unit change）：新增或刪除一條使用者–物品邊。"""

    user: str
    item: str
    timestamp: int = 0
    op: EdgeOp = EdgeOp.ADD


@dataclass(frozen=True)
class EdgeOutcome:
    user: int
    item: int
    new_user: bool = False
    new_item: bool = False
    duplicate: bool = False


class IdRegistry:
    """外部標籤 ↔ 內部索引。只增不減。"""

    def __init__(self, kind: str):
        self.kind = kind
        self._labels: list[str] = []
        self._index: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def register(self, label: str) -> tuple[int, bool]:
        """回傳 (索引, 是否為新註冊)。"""
        idx = self._index.get(label)
        if idx is not None:
            return idx, False
        idx = len(self._labels)
        self._labels.append(label)
        self._index[label] = idx
        return idx, True

    def index_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownNodeError(f"未註冊的{self.kind}: {label!r}") from None

    def peek_index(self, label: str) -> int:
        """已註冊則回傳其索引，否則回傳「註冊後會拿到」的索引。"""
        idx = self._index.get(label)
        return len(self._labels) if idx is None else idx

    def label_of(self, idx: int) -> str:
        if idx < 0 or idx >= len(self._labels):
            raise UnknownNodeError(f"{self.kind}索引超出範圍: {idx}")
        return self._labels[idx]

    def labels(self) -> list[str]:
        return list(self._labels)

    @classmethod
    def from_labels(cls, kind: str, labels: list[str]) -> "IdRegistry":
        reg = cls(kind)
        for label in labels:
            _, is_new = reg.register(label)
            if not is_new:
                raise GraphAuditError(f"{kind}標籤重複: {label!r}")
        return reg


class BipartiteGraph:
    """動態二部圖，鄰接矩陣 A 以雙向排序鄰接表保存。"""

    def __init__(self) -> None:
        self.users = IdRegistry("使用者")
        self.items = IdRegistry("物品")
        self._items_of_user: list[list[int]] = []
        self._users_of_item: list[list[int]] = []
        self.edge_count = 0

    # ------------------------------------------------------------
    # 註冊 / 查詢
    # ------------------------------------------------------------
    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def user_index(self, label: str) -> int:
        return self.users.index_of(label)

    def item_index(self, label: str) -> int:
        return self.items.index_of(label)

    def register_user(self, label: str) -> tuple[int, bool]:
        idx, is_new = self.users.register(label)
        if is_new:
            self._items_of_user.append([])
        return idx, is_new

    def register_item(self, label: str) -> tuple[int, bool]:
        idx, is_new = self.items.register(label)
        if is_new:
            self._users_of_item.append([])
        return idx, is_new

    def _check_user(self, user: int) -> None:
        if user < 0 or user >= len(self._items_of_user):
            raise UnknownNodeError(f"未註冊的使用者索引: {user}")

    def _check_item(self, item: int) -> None:
        if item < 0 or item >= len(self._users_of_item):
            raise UnknownNodeError(f"未註冊的物品索引: {item}")

    def neighbors_of_user(self, user: int) -> list[int]:
        """使用者收藏的物品（排序、不重複）。回傳內部 list，呼叫端不可修改。"""
        self._check_user(user)
        return self._items_of_user[user]

    def neighbors_of_item(self, item: int) -> list[int]:
        self._check_item(item)
        return self._users_of_item[item]

    def user_degree(self, user: int) -> int:
        self._check_user(user)
        return len(self._items_of_user[user])

    def item_degree(self, item: int) -> int:
        self._check_item(item)
        return len(self._users_of_item[item])

    def has_edge(self, user: int, item: int) -> bool:
        if user < 0 or user >= len(self._items_of_user):
            return False
        items = self._items_of_user[user]
        pos = bisect.bisect_left(items, item)
        return pos < len(items) and items[pos] == item

    def has_edge_labels(self, user_label: str, item_label: str) -> bool:
        if user_label not in self.users or item_label not in self.items:
            return False
        return self.has_edge(self.users.index_of(user_label), self.items.index_of(item_label))

    # ------------------------------------------------------------
    # 變動
    # ------------------------------------------------------------
    def add_edge(self, user_label: str, item_label: str, ts: int = 0) -> EdgeOutcome:
        """新增一條邊；新標籤自動註冊。重複邊不改變狀態，只回報 duplicate=True。"""
        user, new_user = self.register_user(user_label)
        item, new_item = self.register_item(item_label)
        items = self._items_of_user[user]
        pos = bisect.bisect_left(items, item)
        if pos < len(items) and items[pos] == item:
            return EdgeOutcome(user, item, new_user, new_item, duplicate=True)
        items.insert(pos, item)
        bisect.insort(self._users_of_item[item], user)
        self.edge_count += 1
        return EdgeOutcome(user, item, new_user, new_item)

    def remove_edge(self, user_label: str, item_label: str) -> EdgeOutcome:
        """刪除一條既有邊；節點保留註冊（度數可變成 0）。"""
        if user_label not in self.users or item_label not in self.items:
            raise MissingEdgeError(f"邊不存在: ({user_label!r}, {item_label!r})")
        user = self.users.index_of(user_label)
        item = self.items.index_of(item_label)
        items = self._items_of_user[user]
        pos = bisect.bisect_left(items, item)
        if pos >= len(items) or items[pos] != item:
            raise MissingEdgeError(f"邊不存在: ({user_label!r}, {item_label!r})")
        del items[pos]
        users = self._users_of_item[item]
        del users[bisect.bisect_left(users, user)]
        self.edge_count -= 1
        return EdgeOutcome(user, item)

    def apply_event(self, event: EdgeEvent) -> EdgeOutcome:
        if event.op is EdgeOp.REMOVE:
            return self.remove_edge(event.user, event.item)
        return self.add_edge(event.user, event.item, event.timestamp)

    # ------------------------------------------------------------
    # 工具
    # ------------------------------------------------------------
    def edges(self) -> list[tuple[int, int]]:
        return [(u, a) for u, items in enumerate(self._items_of_user) for a in items]

    def copy(self) -> "BipartiteGraph":
        g = BipartiteGraph()
        g.users = IdRegistry.from_labels(self.users.kind, self.users.labels())
        g.items = IdRegistry.from_labels(self.items.kind, self.items.labels())
        g._items_of_user = [list(x) for x in self._items_of_user]
        g._users_of_item = [list(x) for x in self._users_of_item]
        g.edge_count = self.edge_count
        return g

    def audit(self) -> None:
        """全掃描檢查雙向鄰接一致性與度數帳；不一致時丟出 GraphAuditError。"""
        if len(self._items_of_user) != len(self.users) or len(self._users_of_item) != len(self.items):
            raise GraphAuditError("鄰接表長度與註冊表不一致")
        user_total = 0
        for u, items in enumerate(self._items_of_user):
            user_total += len(items)
            for prev, cur in zip(items, items[1:]):
                if prev >= cur:
                    raise GraphAuditError(f"使用者 {u} 的物品清單未排序或重複")
            for a in items:
                if a >= len(self._users_of_item):
                    raise GraphAuditError(f"使用者 {u} 指向未註冊物品 {a}")
                users = self._users_of_item[a]
                pos = bisect.bisect_left(users, u)
                if pos >= len(users) or users[pos] != u:
                    raise GraphAuditError(f"邊 ({u},{a}) 只存在於 itemsOfUser")
        item_total = 0
        for a, users in enumerate(self._users_of_item):
            item_total += len(users)
            for prev, cur in zip(users, users[1:]):
                if prev >= cur:
                    raise GraphAuditError(f"物品 {a} 的使用者清單未排序或重複")
        if not (user_total == item_total == self.edge_count):
            raise GraphAuditError(
                f"度數帳不一致: Σk_i={user_total}, Σk_α={item_total}, l={self.edge_count}"
            )

    def to_state(self) -> dict:
        return {
            "user_labels": self.users.labels(),
            "item_labels": self.items.labels(),
            "items_of_user": [list(x) for x in self._items_of_user],
            "edge_count": self.edge_count,
        }

    @classmethod
    def from_state(cls, state: dict) -> "BipartiteGraph":
        g = cls()
        g.users = IdRegistry.from_labels("使用者", list(state["user_labels"]))
        g.items = IdRegistry.from_labels("物品", list(state["item_labels"]))
        g._items_of_user = [list(x) for x in state["items_of_user"]]
        g._users_of_item = [[] for _ in range(len(g.items))]
        for u, items in enumerate(g._items_of_user):
            for a in items:
                g._users_of_item[a].append(u)
        g.edge_count = int(state["edge_count"])
        g.audit()
        return g

    def __repr__(self) -> str:
        return f"BipartiteGraph(users={self.n_users}, items={self.n_items}, edges={self.edge_count})"
