"""Stochastic-block-model fixture graphs for tests and desk-scale runs."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientLabelsError
from .graph import Graph, canonical_edges


def sbm_generate(n_per_class: int, n_classes: int, p_in: float, p_out: float,
                 feat_dim: int, feat_noise: float, seed: int,
                 train_per_class: int = 20) -> Graph:
    """Community graph with class-centroid features plus seeded noise.

    Within-class pairs connect with probability p_in, cross-class with
    p_out. Features are a one-hot-ish class centroid over feat_dim plus
    gaussian noise. The train mask takes the first train_per_class nodes
    of each class (nodes are generated in class order, so this is a
    deterministic balanced split); everything else is test.
    """
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError("need 0 <= p_out <= p_in <= 1")
    if n_per_class < train_per_class:
        raise InsufficientLabelsError(
            f"{n_per_class} nodes per class cannot supply "
            f"{train_per_class} labeled nodes per class")
    rng = np.random.default_rng(seed)
    n = n_per_class * n_classes
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)

    centroids = np.zeros((n_classes, feat_dim), dtype=np.float64)
    centroids[np.arange(n_classes), np.arange(n_classes) % feat_dim] = 1.0
    features = centroids[labels] + feat_noise * rng.standard_normal((n, feat_dim))
    features = features.astype(np.float32)

    iu, ju = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(p.shape[0]) < p
    pairs = np.stack([iu[keep], ju[keep]], axis=1)

    train = np.zeros(n, dtype=bool)
    for c in range(n_classes):
        idx = np.flatnonzero(labels == c)[:train_per_class]
        train[idx] = True
    val = np.zeros(n, dtype=bool)
    test = ~train

    g = Graph(features, canonical_edges(pairs, n), labels, n_classes, train, val, test)
    g.validate()
    return g
