"""引擎快照：存檔 / 讀回

檔案格式（little-endian）：
    magic  b"DFRS"      4 bytes
    version            u16
    flags              u16（保留，目前為 0）
    payload_len        u64
    crc32(payload)     u32
    payload            pickle（config digest + 串流游標 + 各引擎狀態）

版本不符丟 SnapshotVersionError；長度或 checksum 不符丟 SnapshotCorruptError。
"""

from __future__ import annotations

import logging
import os
import pickle
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from diffusion_rec.errors import SnapshotCorruptError, SnapshotError, SnapshotVersionError

logger = logging.getLogger(__name__)

MAGIC = b"DFRS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHQI")
_PICKLE_PROTOCOL = 4


@dataclass
class Snapshot:
    config_digest: str
    runner_state: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    @property
    def cursor(self) -> int:
        return int(self.runner_state.get("cursor", 0))

    @property
    def algorithms(self) -> list[str]:
        return [name for name, _ in self.runner_state.get("engines", [])]

    def summary(self) -> dict:
        engines = self.runner_state.get("engines", [])
        graph = engines[0][1]["graph"] if engines else {}
        return {
            "version": self.version,
            "config_digest": self.config_digest,
            "edges_fed": self.cursor,
            "algorithms": ",".join(self.algorithms),
            "users": len(graph.get("user_labels", [])),
            "items": len(graph.get("item_labels", [])),
            "edges": int(graph.get("edge_count", 0)),
        }


def encode_snapshot(snapshot: Snapshot, version: int = FORMAT_VERSION) -> bytes:
    payload = pickle.dumps(
        {"config_digest": snapshot.config_digest, "runner": snapshot.runner_state},
        protocol=_PICKLE_PROTOCOL,
    )
    header = _HEADER.pack(MAGIC, version, 0, len(payload), zlib.crc32(payload))
    return header + payload


def decode_snapshot(blob: bytes) -> Snapshot:
    if len(blob) < _HEADER.size:
        raise SnapshotCorruptError(f"快照檔過短（{len(blob)} bytes），可能被截斷")
    magic, version, _flags, length, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotCorruptError("不是快照檔（magic 不符）")
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(f"快照版本 {version} 與程式支援的版本 {FORMAT_VERSION} 不符")
    payload = blob[_HEADER.size :]
    if len(payload) != length:
        raise SnapshotCorruptError(f"快照內容長度 {len(payload)} 與表頭記載的 {length} 不符")
    if zlib.crc32(payload) != crc:
        raise SnapshotCorruptError("快照 checksum 不符")
    try:
        data = pickle.loads(payload)
    except Exception as exc:
        raise SnapshotCorruptError(f"快照內容無法解析: {exc}") from exc
    return Snapshot(str(data["config_digest"]), data["runner"], version)


def save_snapshot(snapshot: Snapshot, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = encode_snapshot(snapshot)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)
    logger.debug("快照已寫入 %s（%d bytes）", path, len(blob))
    return path


def load_snapshot(path: str | os.PathLike) -> Snapshot:
    path = Path(path)
    if not path.is_file():
        raise SnapshotError(f"找不到快照檔: {path}")
    with open(path, "rb") as f:
        return decode_snapshot(f.read())
