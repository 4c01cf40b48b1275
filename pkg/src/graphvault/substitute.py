"""Substitute-graph construction from node features.

The backbone never sees real edges; it trains on one of these stand-ins:
k-nearest-neighbor by cosine similarity, cosine thresholding, or uniformly
random pairs. Everything is a pure function of (features, spec.seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, canonical_edges

_CHUNK = 512  # rows per similarity block, keeps n x n matrices off the heap


@dataclass(frozen=True)
class SubstituteSpec:
    kind: str                   # "knn" | "cosine_threshold" | "random"
    k: int = 2
    tau: float = 0.5
    edge_fraction: float = 1.0
    density_match: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("knn", "cosine_threshold", "random"):
            raise ValueError(f"unknown substitute kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "tau": self.tau,
                "edge_fraction": self.edge_fraction,
                "density_match": self.density_match, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "SubstituteSpec":
        return SubstituteSpec(**d)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; zero-norm rows stay zero (cosine sim 0)."""
    x = x.astype(np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return x / norms


def _knn_pairs(features: np.ndarray, k: int) -> np.ndarray:
    n = features.shape[0]
    if k <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    if k >= n:
        raise ValueError(f"knn k={k} must be < n_nodes={n}")
    unit = _unit_rows(features)
    out = []
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        sim = unit[start:stop] @ unit.T
        rows = np.arange(start, stop)
        sim[np.arange(stop - start), rows] = -np.inf  # never pick self
        # ties broken toward the lower node index: stable sort on (-sim, j)
        idx = np.argsort(-sim, axis=1, kind="stable")[:, :k]
        src = np.repeat(rows, k)
        out.append(np.stack([src, idx.ravel()], axis=1))
    return np.concatenate(out, axis=0)


def _threshold_pairs(features: np.ndarray, tau: float) -> np.ndarray:
    n = features.shape[0]
    unit = _unit_rows(features)
    out = []
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        sim = unit[start:stop] @ unit.T
        i, j = np.nonzero(sim >= tau)
        i = i + start
        keep = i < j  # one canonical copy, no self-pairs
        if keep.any():
            out.append(np.stack([i[keep], j[keep]], axis=1))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(out, axis=0)


def _sample_pairs(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` distinct undirected non-self pairs, uniform over all pairs."""
    total = n * (n - 1) // 2
    count = min(count, total)
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if total <= 1_000_000:
        lin = rng.choice(total, size=count, replace=False)
        # invert the row-major upper-triangle linearization
        i = (n - 2 - np.floor(np.sqrt(-8.0 * lin + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
        j = (lin + i + 1 - i * (2 * n - i - 1) // 2).astype(np.int64)
        return np.stack([i, j], axis=1)
    seen = set()
    pairs = []
    while len(pairs) < count:
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u == v:
            continue
        if u > v:
            u, v = v, u
        if (u, v) in seen:
            continue
        seen.add((u, v))
        pairs.append((u, v))
    return np.array(pairs, dtype=np.int64)


def _subsample_pairs(pairs: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if pairs.shape[0] <= count:
        return pairs
    keep = rng.choice(pairs.shape[0], size=count, replace=False)
    return pairs[np.sort(keep)]


def build_substitute(graph: Graph, spec: SubstituteSpec) -> Graph:
    """Same nodes/features/labels/masks, feature-derived edge set."""
    n = graph.n_nodes
    rng = np.random.default_rng(spec.seed)
    real_undirected = graph.n_edges // 2
    if spec.kind == "knn":
        pairs = _knn_pairs(graph.features, spec.k)
    elif spec.kind == "cosine_threshold":
        pairs = _threshold_pairs(graph.features, spec.tau)
        if spec.density_match:
            pairs = _subsample_pairs(pairs, real_undirected, rng)
    else:  # random
        if spec.edge_fraction < 0:
            raise ValueError("edge_fraction must be >= 0")
        want = int(spec.edge_fraction * real_undirected)
        pairs = _sample_pairs(n, want, rng)
    sub = graph.replace_edges(canonical_edges(pairs, n))
    sub.validate()
    return sub
