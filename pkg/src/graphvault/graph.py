"""Graph container and symmetric degree normalization.

Edges are stored directed-both-ways: for every undirected edge {u, v} the
array holds both (u, v) and (v, u), sorted by (src, dst) and deduplicated.
Edge counts throughout the package refer to this directed-stored count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedGraphError


@dataclass
class Graph:
    features: np.ndarray        # (n, d) float32
    edges: np.ndarray           # (m, 2) uint32, directed-stored
    labels: np.ndarray          # (n,) int64 in [0, n_classes)
    n_classes: int
    train_mask: np.ndarray      # (n,) bool
    val_mask: np.ndarray
    test_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_edges(self) -> int:
        """Directed-stored edge count (twice the undirected count)."""
        return self.edges.shape[0]

    def validate(self) -> None:
        """Raise MalformedGraphError on any invariant violation."""
        n = self.n_nodes
        if self.features.dtype != np.float32:
            raise MalformedGraphError("features must be float32")
        if self.labels.shape != (n,):
            raise MalformedGraphError("labels shape mismatch")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise MalformedGraphError("label outside [0, n_classes)")
        for name, mask in (("train", self.train_mask), ("val", self.val_mask),
                           ("test", self.test_mask)):
            if mask.shape != (n,) or mask.dtype != np.bool_:
                raise MalformedGraphError(f"{name} mask malformed")
        if np.any(self.train_mask & self.val_mask) or np.any(self.train_mask & self.test_mask) \
                or np.any(self.val_mask & self.test_mask):
            raise MalformedGraphError("masks overlap")
        e = self.edges
        if e.ndim != 2 or e.shape[1] != 2:
            raise MalformedGraphError("edges must be (m, 2)")
        if e.shape[0]:
            if int(e.max()) >= n:
                raise MalformedGraphError(f"edge endpoint {int(e.max())} >= n_nodes {n}")
            if np.any(e[:, 0] == e[:, 1]):
                raise MalformedGraphError("self-loop stored in edge list")
            order = np.lexsort((e[:, 1], e[:, 0]))
            if not np.array_equal(order, np.arange(e.shape[0])):
                raise MalformedGraphError("edge list not sorted by (src, dst)")
            if np.any((np.diff(e[:, 0]) == 0) & (np.diff(e[:, 1]) == 0)):
                raise MalformedGraphError("duplicate edge")
            # undirected closure: the reversed pair set must equal the pair set
            key = e[:, 0].astype(np.uint64) * np.uint64(n) + e[:, 1].astype(np.uint64)
            rkey = e[:, 1].astype(np.uint64) * np.uint64(n) + e[:, 0].astype(np.uint64)
            if not np.array_equal(np.sort(key), np.sort(rkey)):
                raise MalformedGraphError("edge (u,v) stored without (v,u)")

    def replace_edges(self, edges: np.ndarray) -> "Graph":
        """New Graph sharing features/labels/masks with a different edge set."""
        return Graph(self.features, edges, self.labels, self.n_classes,
                     self.train_mask, self.val_mask, self.test_mask)


def empty_masks(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (np.zeros(n, dtype=bool), np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))


def canonical_edges(pairs: np.ndarray, n_nodes: int) -> np.ndarray:
    """Symmetrize, drop self-loops, dedup, and sort an arbitrary pair list.

    Accepts any (k, 2) integer array; returns the directed-stored form.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.uint32)
    if pairs.min() < 0 or pairs.max() >= n_nodes:
        raise MalformedGraphError("edge endpoint out of range")
    both = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
    both = both[both[:, 0] != both[:, 1]]
    if both.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.uint32)
    key = both[:, 0] * np.int64(n_nodes) + both[:, 1]
    key = np.unique(key)
    out = np.empty((key.shape[0], 2), dtype=np.uint32)
    out[:, 0] = key // n_nodes
    out[:, 1] = key % n_nodes
    return out


@dataclass
class NormalizedAdjacency:
    """Self-loop-augmented, symmetrically degree-normalized adjacency in COO.

    Triplets are sorted by (row, col); value(i, j) = 1 / sqrt(deg_i * deg_j)
    where deg counts neighbors plus the self-loop.
    """

    n: int
    rows: np.ndarray            # (nnz,) uint32
    cols: np.ndarray            # (nnz,) uint32
    vals: np.ndarray            # (nnz,) float32
    degrees: np.ndarray         # (n,) int64, neighbor count + 1

    nbytes_coo: int = field(init=False)

    def __post_init__(self):
        # 12 bytes per triplet (u32 row + u32 col + f32 value)
        self.nbytes_coo = int(self.rows.size) * 12

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def lookup(self, i: int, j: int) -> float:
        """Value at (i, j), 0.0 if absent."""
        lo = np.searchsorted(self.rows, i, side="left")
        hi = np.searchsorted(self.rows, i, side="right")
        k = lo + np.searchsorted(self.cols[lo:hi], j, side="left")
        if k < hi and self.cols[k] == j:
            return float(self.vals[k])
        return 0.0

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n), dtype=np.float32)
        dense[self.rows, self.cols] = self.vals
        return dense


def normalize(graph: Graph) -> NormalizedAdjacency:
    """Degree-normalize the graph's adjacency after adding self-loops."""
    graph.validate()
    n = graph.n_nodes
    e = graph.edges
    deg = np.ones(n, dtype=np.int64)  # self-loop
    if e.shape[0]:
        deg += np.bincount(e[:, 0].astype(np.int64), minlength=n)
    rows = np.concatenate([e[:, 0], np.arange(n, dtype=np.uint32)])
    cols = np.concatenate([e[:, 1], np.arange(n, dtype=np.uint32)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order].astype(np.uint32), cols[order].astype(np.uint32)
    inv_sqrt = 1.0 / np.sqrt(deg.astype(np.float64))
    vals = (inv_sqrt[rows] * inv_sqrt[cols]).astype(np.float32)
    return NormalizedAdjacency(n=n, rows=rows, cols=cols, vals=vals, degrees=deg)
