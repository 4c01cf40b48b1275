"""Edge-leakage audit: similarity ranking over node pairs, scored by AUC.

An attacker who can see node embeddings guesses that similar pairs are
connected. We sample matched positive/negative pairs, compute six distance
metrics, and report the rank AUC of -distance as the leakage score for
three exposure levels: the unprotected model (org), the partitioned
deployment's public half (gv), and a feature-only baseline (base).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .models import GcnModel, PartitionedModel, backbone_forward, mlp_forward

METRICS = ("euclidean", "correlation", "cosine", "chebyshev", "braycurtis",
           "canberra")
EXPOSURES = ("org", "gv", "base")


@dataclass
class PairSample:
    pos: np.ndarray             # (p, 2) u < v, true edges
    neg: np.ndarray             # (p, 2) u < v, sampled non-edges
    seed: int

    @staticmethod
    def sample(graph: Graph, seed: int) -> "PairSample":
        e = graph.edges
        pos = e[e[:, 0] < e[:, 1]].astype(np.int64)
        n = graph.n_nodes
        keys = set((pos[:, 0] * n + pos[:, 1]).tolist())
        rng = np.random.default_rng(seed)
        neg = []
        seen = set()
        while len(neg) < pos.shape[0]:
            u = int(rng.integers(0, n))
            v = int(rng.integers(0, n))
            if u == v:
                continue
            if u > v:
                u, v = v, u
            k = u * n + v
            if k in keys or k in seen:
                continue
            seen.add(k)
            neg.append((u, v))
        return PairSample(pos, np.array(neg, dtype=np.int64), seed)


def _row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.square(x).sum(axis=1))


def pair_distances(metric: str, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rowwise distance between matching rows of u and v (float64)."""
    u = np.atleast_2d(u).astype(np.float64)
    v = np.atleast_2d(v).astype(np.float64)
    if u.shape != v.shape:
        raise ValueError("pair arrays must have equal shapes")
    if metric == "euclidean":
        return _row_norms(u - v)
    if metric == "cosine":
        nu, nv = _row_norms(u), _row_norms(v)
        denom = nu * nv
        sim = np.where(denom > 0, (u * v).sum(axis=1) / np.where(denom > 0, denom, 1.0), 0.0)
        return 1.0 - sim
    if metric == "correlation":
        uc = u - u.mean(axis=1, keepdims=True)
        vc = v - v.mean(axis=1, keepdims=True)
        nu, nv = _row_norms(uc), _row_norms(vc)
        denom = nu * nv
        # zero-variance rows: maximally dissimilar by definition
        sim = np.where(denom > 0, (uc * vc).sum(axis=1) / np.where(denom > 0, denom, 1.0), 0.0)
        return 1.0 - sim
    if metric == "chebyshev":
        return np.abs(u - v).max(axis=1)
    if metric == "braycurtis":
        denom = np.abs(u + v).sum(axis=1)
        num = np.abs(u - v).sum(axis=1)
        return np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    if metric == "canberra":
        denom = np.abs(u) + np.abs(v)
        terms = np.where(denom > 0, np.abs(u - v) / np.where(denom > 0, denom, 1.0), 0.0)
        return terms.sum(axis=1)
    raise ValueError(f"unknown metric {metric!r}")


def pair_distance(metric: str, u: np.ndarray, v: np.ndarray) -> float:
    return float(pair_distances(metric, u[None, :], v[None, :])[0])


def roc_auc(scores_pos: np.ndarray, scores_neg: np.ndarray) -> float:
    """Rank AUC (tie-corrected): P(pos > neg) + 0.5 P(pos = neg)."""
    scores_pos = np.asarray(scores_pos, dtype=np.float64)
    scores_neg = np.asarray(scores_neg, dtype=np.float64)
    if scores_pos.size == 0 or scores_neg.size == 0:
        raise ValueError("both score sets must be nonempty")
    both = np.concatenate([scores_pos, scores_neg])
    _, inv, counts = np.unique(both, return_inverse=True, return_counts=True)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    avg_rank = starts + (counts + 1) / 2.0      # 1-based midranks
    ranks = avg_rank[inv]
    n_pos, n_neg = scores_pos.size, scores_neg.size
    u_stat = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


@dataclass
class TrainedSystem:
    """Everything the three exposure levels are measured against."""

    pm: PartitionedModel
    original: GcnModel
    mlp: GcnModel
    graph: Graph


def observable_embeddings(system: TrainedSystem, exposure: str,
                          include_labels: bool = False,
                          concat: bool = True):
    """Embeddings an attacker sees under the given exposure.

    org: every layer of the unprotected model (real adjacency).
    gv: the public backbone's layers only; the vault side stays sealed.
    base: every layer of the feature-only baseline.
    """
    g = system.graph
    if exposure == "org":
        layers = backbone_forward(system.original, g.features, system.pm.real_adj)
    elif exposure == "gv":
        layers = backbone_forward(
            system.pm.backbone, g.features,
            system.pm.sub_adj if system.pm.backbone.kind == "gcn" else None)
        if include_labels:
            from .partition import run_partitioned
            rep = run_partitioned(system.pm, g, np.arange(g.n_nodes))
            onehot = np.zeros((g.n_nodes, g.n_classes), dtype=np.float32)
            onehot[np.arange(g.n_nodes), rep.labels] = 1.0
            layers = layers + [onehot]
    elif exposure == "base":
        layers = mlp_forward(system.mlp, g.features)
    else:
        raise ValueError(f"unknown exposure {exposure!r}")
    if not concat:
        return layers
    return np.concatenate(layers, axis=1)


@dataclass
class AttackReport:
    exposure: str
    auc: dict[str, float]
    n_pairs: int
    seed: int

    def to_dict(self) -> dict:
        return {"exposure": self.exposure, "auc": self.auc,
                "n_pairs": self.n_pairs, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_attack(system: TrainedSystem, exposure: str, seed: int,
               metrics: tuple[str, ...] = METRICS,
               include_labels: bool = False,
               pairs: PairSample | None = None) -> AttackReport:
    """AUC per distance metric; higher means more edge leakage."""
    emb = observable_embeddings(system, exposure, include_labels=include_labels)
    if pairs is None:
        pairs = PairSample.sample(system.graph, seed)
    auc = {}
    for metric in metrics:
        d_pos = pair_distances(metric, emb[pairs.pos[:, 0]], emb[pairs.pos[:, 1]])
        d_neg = pair_distances(metric, emb[pairs.neg[:, 0]], emb[pairs.neg[:, 1]])
        auc[metric] = roc_auc(-d_pos, -d_neg)
    return AttackReport(exposure=exposure, auc=auc,
                        n_pairs=int(pairs.pos.shape[0]), seed=seed)


def attack_table(reports: list[AttackReport],
                 metrics: tuple[str, ...] = METRICS) -> str:
    """Aligned grid, one column block per exposure, rows per metric."""
    by_exp = {r.exposure: r for r in reports}
    cols = [e for e in EXPOSURES if e in by_exp]
    head = f"{'metric':12s}" + "".join(f"  {'M_' + e:>7s}" for e in cols)
    lines = [head]
    for m in metrics:
        row = f"{m:12s}"
        for e in cols:
            row += f"  {by_exp[e].auc[m]:7.3f}"
        lines.append(row)
    return "\n".join(lines)
