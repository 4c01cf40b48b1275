"""GVG binary dataset container, little-endian with a CRC32 footer.

Layout (v1): magic "GVLT", u16 version, u32 n_nodes, u32 n_features,
u32 n_edges (directed-stored), u16 n_classes, f32 features row-major,
(u32 src, u32 dst) per edge, u16 label per node, three LSB-first mask
bitsets of ceil(n/8) bytes each (train, val, test), u32 CRC32 of all
preceding bytes.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import BadMagicError, ChecksumError, IndexRangeError, TruncatedError
from .graph import Graph

MAGIC = b"GVLT"
VERSION = 1


def _pack_mask(mask: np.ndarray) -> bytes:
    return np.packbits(mask.astype(np.uint8), bitorder="little").tobytes()


def _unpack_mask(raw: bytes, n: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return bits[:n].astype(bool)


def write_container(graph: Graph, path: str | Path) -> None:
    graph.validate()
    n, d, m = graph.n_nodes, graph.n_features, graph.n_edges
    parts = [
        MAGIC,
        struct.pack("<HIIIH", VERSION, n, d, m, graph.n_classes),
        np.ascontiguousarray(graph.features, dtype="<f4").tobytes(),
        np.ascontiguousarray(graph.edges, dtype="<u4").tobytes(),
        np.ascontiguousarray(graph.labels, dtype="<u2").tobytes(),
        _pack_mask(graph.train_mask),
        _pack_mask(graph.val_mask),
        _pack_mask(graph.test_mask),
    ]
    body = b"".join(parts)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


class _Cursor:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.raw):
            raise TruncatedError(
                f"need {size} bytes at offset {self.pos}, file has {len(self.raw)}")
        out = self.raw[self.pos:self.pos + size]
        self.pos += size
        return out


def read_container(path: str | Path) -> Graph:
    raw = Path(path).read_bytes()
    cur = _Cursor(raw)
    if cur.take(4) != MAGIC:
        raise BadMagicError(f"{path}: not a GVG container")
    version, n, d, m, n_classes = struct.unpack("<HIIIH", cur.take(16))
    if version != VERSION:
        raise BadMagicError(f"unsupported GVG version {version}")
    features = np.frombuffer(cur.take(4 * n * d), dtype="<f4").reshape(n, d)
    edges = np.frombuffer(cur.take(8 * m), dtype="<u4").reshape(m, 2)
    labels = np.frombuffer(cur.take(2 * n), dtype="<u2").astype(np.int64)
    mask_bytes = (n + 7) // 8
    train = _unpack_mask(cur.take(mask_bytes), n)
    val = _unpack_mask(cur.take(mask_bytes), n)
    test = _unpack_mask(cur.take(mask_bytes), n)
    stored_crc = struct.unpack("<I", cur.take(4))[0]
    actual_crc = zlib.crc32(raw[:cur.pos - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(f"CRC mismatch: stored {stored_crc:#x}, computed {actual_crc:#x}")
    if m and int(edges.max()) >= n:
        raise IndexRangeError(f"edge endpoint {int(edges.max())} >= n_nodes {n}")
    if n and labels.size and int(labels.max()) >= n_classes:
        raise IndexRangeError(f"label {int(labels.max())} >= n_classes {n_classes}")
    g = Graph(
        features=features.astype(np.float32),
        edges=np.ascontiguousarray(edges, dtype=np.uint32),
        labels=labels,
        n_classes=n_classes,
        train_mask=train, val_mask=val, test_mask=test,
    )
    g.validate()
    return g
