"""Two-phase training (public backbone, private rectifier) and evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, InsufficientLabelsError
from .graph import Graph, NormalizedAdjacency, normalize
from .models import (GcnModel, ModelSpec, PartitionedModel, backbone_forward,
                     build_backbone, build_original, build_rectifier,
                     rectifier_forward, rectifier_plan)
from .nn import AdamState, adam_step, layer_backward, layer_forward, \
    masked_softmax_cross_entropy
from .substitute import SubstituteSpec, build_substitute


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    weight_decay: float = 5e-4
    seed: int = 0
    patience: int | None = None     # early stop on val accuracy when set
    eval_every: int = 0             # 0 = silent
    dropout: float = 0.0            # hidden-layer dropout, off by default

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


def make_split(graph: Graph, per_class: int, seed: int) \
        -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Balanced labeled split: per_class train nodes, the rest is test."""
    rng = np.random.default_rng(seed)
    n = graph.n_nodes
    train = np.zeros(n, dtype=bool)
    for c in range(graph.n_classes):
        idx = np.flatnonzero(graph.labels == c)
        if idx.size < per_class:
            raise InsufficientLabelsError(
                f"class {c} has {idx.size} nodes, needs {per_class}")
        train[rng.choice(idx, size=per_class, replace=False)] = True
    val = np.zeros(n, dtype=bool)
    return train, val, ~train


class EdgeAccessAudit:
    """Graph proxy that counts reads of the real edge list.

    Scalar metadata (counts, features, labels, masks) passes through
    untallied; only `.edges` is the private payload.
    """

    def __init__(self, graph: Graph):
        self._graph = graph
        self.edge_reads = 0

    @property
    def edges(self) -> np.ndarray:
        self.edge_reads += 1
        return self._graph.edges

    def replace_edges(self, edges: np.ndarray) -> Graph:
        return self._graph.replace_edges(edges)

    def __getattr__(self, name):
        return getattr(self._graph, name)


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Percent correct over the masked nodes."""
    idx = np.flatnonzero(mask)
    pred = logits[idx].argmax(axis=1)
    return 100.0 * float((pred == labels[idx]).mean())


def _dropout_masks(model: GcnModel, n: int, p: float,
                   rng: np.random.Generator) -> list[np.ndarray | None]:
    masks: list[np.ndarray | None] = []
    for k, params in enumerate(model.layers):
        if p > 0.0 and k < model.n_layers - 1:
            keep = (rng.random((n, params.d_out)) >= p) / (1.0 - p)
            masks.append(keep.astype(params.weight.dtype))
        else:
            masks.append(None)
    return masks


def fit_chain(model: GcnModel, x: np.ndarray, adj: NormalizedAdjacency | None,
              labels: np.ndarray, train_mask: np.ndarray, cfg: TrainConfig,
              val_mask: np.ndarray | None = None) -> dict:
    """Full-batch training of a plain layer chain (backbone/original/mlp)."""
    if model.frozen:
        raise ValueError("model is frozen")
    use_adj = adj if model.kind == "gcn" else None
    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    history = {"loss": [], "val_acc": []}
    best_val, best_params, stale = -1.0, None, 0
    x = x.astype(model.layers[0].weight.dtype, copy=False)
    for epoch in range(cfg.epochs):
        masks = _dropout_masks(model, x.shape[0], cfg.dropout, rng)
        h = x
        caches = []
        for params, act, drop in zip(model.layers, model.activations, masks):
            h, cache = layer_forward(use_adj, [h], params, act)
            if drop is not None:
                h = h * drop
            caches.append(cache)
        loss, grad = masked_softmax_cross_entropy(h, labels, train_mask)
        if not np.isfinite(loss):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}")
        history["loss"].append(loss)
        tensors, grads = [], []
        for params, cache, drop in zip(reversed(model.layers), reversed(caches),
                                       reversed(masks)):
            if drop is not None:
                grad = grad * drop
            grad_parts, gw, gb = layer_backward(cache, params, grad)
            grad = grad_parts[0]
            tensors.extend((params.weight, params.bias))
            grads.extend((gw, gb))
        adam_step(tensors, grads, opt)
        if val_mask is not None and val_mask.any():
            logits = _chain_logits(model, x, use_adj)
            va = accuracy(logits, labels, val_mask)
            history["val_acc"].append(va)
            if va > best_val:
                best_val, stale = va, 0
                best_params = [(p.weight.copy(), p.bias.copy()) for p in model.layers]
            else:
                stale += 1
                if cfg.patience is not None and stale > cfg.patience:
                    break
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            print(f"epoch {epoch + 1:4d}  loss {loss:.4f}")
    if best_params is not None:
        for p, (w, b) in zip(model.layers, best_params):
            p.weight[...], p.bias[...] = w, b
    return history


def _chain_logits(model: GcnModel, x: np.ndarray,
                  adj: NormalizedAdjacency | None) -> np.ndarray:
    return backbone_forward(model, x, adj)[-1]


def train_backbone(graph: Graph | EdgeAccessAudit, substitute_spec: SubstituteSpec,
                   spec: ModelSpec, cfg: TrainConfig) -> tuple[GcnModel, Graph]:
    """Train the public model on the substitute graph; real edges untouched."""
    if spec.family == "mlp":
        sub_graph = graph.replace_edges(np.zeros((0, 2), dtype=np.uint32))
        sub_adj = None
    else:
        sub_graph = build_substitute(graph, substitute_spec)
        sub_adj = normalize(sub_graph)
    rng = np.random.default_rng(cfg.seed)
    model = build_backbone(spec, rng)
    fit_chain(model, graph.features, sub_adj, graph.labels, graph.train_mask,
              cfg, graph.val_mask if graph.val_mask.any() else None)
    return model, sub_graph


def train_original(graph: Graph, spec: ModelSpec, cfg: TrainConfig) -> GcnModel:
    """Reference unprotected model on the real adjacency."""
    adj = normalize(graph)
    rng = np.random.default_rng(cfg.seed)
    model = build_original(spec, rng)
    fit_chain(model, graph.features, adj, graph.labels, graph.train_mask, cfg,
              graph.val_mask if graph.val_mask.any() else None)
    return model


def train_rectifier(backbone: GcnModel, graph_real: Graph, topology: str,
                    cfg: TrainConfig, spec: ModelSpec,
                    sub_adj: NormalizedAdjacency | None,
                    real_adj: NormalizedAdjacency | None = None) -> GcnModel:
    """Train the vault-side rectifier against the frozen backbone."""
    backbone.frozen = True
    real_adj = real_adj if real_adj is not None else normalize(graph_real)
    bb_emb = backbone_forward(backbone, graph_real.features, sub_adj)
    plan = rectifier_plan(topology, backbone.n_layers, len(spec.rectifier_widths))
    rng = np.random.default_rng(cfg.seed + 1)
    rect = build_rectifier(spec, topology, rng)
    labels, train_mask = graph_real.labels, graph_real.train_mask
    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    for epoch in range(cfg.epochs):
        rect_outs, caches = rectifier_forward(rect, plan, bb_emb, real_adj,
                                              with_caches=True)
        loss, grad = masked_softmax_cross_entropy(rect_outs[-1], labels, train_mask)
        if not np.isfinite(loss):
            raise DivergenceError(f"rectifier loss non-finite at epoch {epoch}")
        grad_outs: list[np.ndarray | None] = [None] * rect.n_layers
        grad_outs[-1] = grad
        tensors, grads = [], []
        for k in range(rect.n_layers - 1, -1, -1):
            grad_parts, gw, gb = layer_backward(caches[k], rect.layers[k], grad_outs[k])
            tensors.extend((rect.layers[k].weight, rect.layers[k].bias))
            grads.extend((gw, gb))
            for (kind, i), gp in zip(plan[k], grad_parts):
                if kind == "rect":     # gradients into backbone outputs are dropped
                    grad_outs[i] = gp if grad_outs[i] is None else grad_outs[i] + gp
        adam_step(tensors, grads, opt)
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            print(f"rectifier epoch {epoch + 1:4d}  loss {loss:.4f}")
    return rect


def train_partitioned(graph: Graph, substitute_spec: SubstituteSpec,
                      spec: ModelSpec, topology: str, backbone_cfg: TrainConfig,
                      rectifier_cfg: TrainConfig | None = None) -> PartitionedModel:
    """Steps 1-3: substitute graph, public backbone, private rectifier."""
    rectifier_cfg = rectifier_cfg or TrainConfig(
        epochs=300, lr=backbone_cfg.lr, weight_decay=backbone_cfg.weight_decay,
        seed=backbone_cfg.seed)
    audited = EdgeAccessAudit(graph)
    backbone, sub_graph = train_backbone(audited, substitute_spec, spec, backbone_cfg)
    if audited.edge_reads != 0:
        raise RuntimeError("backbone training read real edges")
    sub_adj = normalize(sub_graph)
    real_adj = normalize(graph)
    rect = train_rectifier(backbone, graph, topology, rectifier_cfg, spec,
                           sub_adj if spec.family != "mlp" else None, real_adj)
    return PartitionedModel(spec, topology, backbone, rect, substitute_spec,
                            sub_adj, real_adj, seed=backbone_cfg.seed)


def _pairwise_euclidean(x: np.ndarray) -> np.ndarray:
    """Plain sqrt-of-squared-differences distances, chunked for memory."""
    n, d = x.shape
    dist = np.empty((n, n))
    chunk = max(1, int(2**24 // max(n * d, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = x[start:stop, None, :] - x[None, :, :]
        dist[start:stop] = np.sqrt(np.square(diff).sum(axis=-1))
    return dist


def silhouette(embeddings: np.ndarray, labels: np.ndarray,
               max_samples: int = 2000, seed: int = 0) -> float:
    """Mean (b - a) / max(a, b) with Euclidean distances.

    a is the mean distance to the sample's own class (self excluded), b the
    smallest mean distance to any other class. Subsamples to max_samples
    nodes (seeded) to keep the distance matrix tractable. Singleton
    clusters score 0 by convention.
    """
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise ValueError("silhouette needs >= 2 classes")
    n = embeddings.shape[0]
    if n > max_samples:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(n, size=max_samples, replace=False))
        embeddings, labels = embeddings[keep], labels[keep]
        if np.unique(labels).size < 2:
            raise ValueError("subsample lost all but one class")
    x = embeddings.astype(np.float64)
    dist = _pairwise_euclidean(x)
    n = x.shape[0]
    classes = np.unique(labels)
    members = {int(c): np.flatnonzero(labels == c) for c in classes}
    scores = np.zeros(n)
    for i in range(n):
        ci = int(labels[i])
        same = members[ci]
        same = same[same != i]
        if same.size == 0:
            continue  # singleton: score stays 0
        a = dist[i, same].mean()
        b = min(dist[i, members[int(c)]].mean() for c in classes if int(c) != ci)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def pca2(x: np.ndarray) -> np.ndarray:
    """Deterministic 2-D principal projection (sign-fixed SVD)."""
    x = x.astype(np.float64)
    centered = x - x.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2] if vt.shape[0] >= 2 else np.vstack([vt, np.zeros((2 - vt.shape[0], vt.shape[1]))])
    for r in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[r]))
        if comps[r, j] < 0:
            comps[r] = -comps[r]
    return centered @ comps.T


@dataclass
class EvalReport:
    family: str
    topology: str
    p_org: float
    p_bb: float
    p_rec: float
    theta_bb: int
    theta_rec: int
    silhouette_backbone: list[float] = field(default_factory=list)
    silhouette_rectifier: list[float] = field(default_factory=list)
    silhouette_original: list[float] = field(default_factory=list)

    @property
    def delta_p(self) -> float:
        return self.p_rec - self.p_bb

    @property
    def degradation(self) -> float:
        return self.p_org - self.p_rec

    def to_dict(self) -> dict:
        return {
            "family": self.family, "topology": self.topology,
            "p_org": self.p_org, "p_bb": self.p_bb, "p_rec": self.p_rec,
            "delta_p": self.delta_p, "degradation": self.degradation,
            "theta_bb": self.theta_bb, "theta_rec": self.theta_rec,
            "silhouette": {
                "backbone": self.silhouette_backbone,
                "rectifier": self.silhouette_rectifier,
                "original": self.silhouette_original,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        head = (f"{'family':8s} {'topology':9s} {'p_org':>6s} {'th_bb(M)':>9s} "
                f"{'p_bb':>6s} {'p_rec':>6s} {'dp':>6s} {'th_rec(M)':>10s} "
                f"{'degr':>6s}")
        row = (f"{self.family:8s} {self.topology:9s} {self.p_org:6.1f} "
               f"{self.theta_bb / 1e6:9.3f} {self.p_bb:6.1f} {self.p_rec:6.1f} "
               f"{self.delta_p:6.1f} {self.theta_rec / 1e6:10.4f} "
               f"{self.degradation:6.1f}")
        return head + "\n" + row


def evaluate(pm: PartitionedModel, graph: Graph, original: GcnModel,
             with_silhouette: bool = True, sil_seed: int = 0) -> EvalReport:
    """Accuracies, protection margin, sizes, per-layer clustering scores."""
    bb_emb = backbone_forward(pm.backbone, graph.features,
                              pm.sub_adj if pm.backbone.kind == "gcn" else None)
    rect_outs, _ = rectifier_forward(pm.rectifier, pm.plan, bb_emb, pm.real_adj,
                                     with_caches=True)
    org_emb = backbone_forward(original, graph.features, pm.real_adj)
    mask = graph.test_mask
    report = EvalReport(
        family=pm.spec.family, topology=pm.topology,
        p_org=accuracy(org_emb[-1], graph.labels, mask),
        p_bb=accuracy(bb_emb[-1], graph.labels, mask),
        p_rec=accuracy(rect_outs[-1], graph.labels, mask),
        theta_bb=pm.backbone.n_params(),
        theta_rec=pm.rectifier.n_params(),
    )
    if with_silhouette:
        report.silhouette_backbone = [
            silhouette(h, graph.labels, seed=sil_seed) for h in bb_emb]
        report.silhouette_rectifier = [
            silhouette(h, graph.labels, seed=sil_seed) for h in rect_outs]
        report.silhouette_original = [
            silhouette(h, graph.labels, seed=sil_seed) for h in org_emb]
    return report


def export_embeddings(pm: PartitionedModel, graph: Graph, out_dir) -> list:
    """Per-layer CSVs: raw embedding, 2-D projection, label column."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bb_emb = backbone_forward(pm.backbone, graph.features,
                              pm.sub_adj if pm.backbone.kind == "gcn" else None)
    rect_outs, _ = rectifier_forward(pm.rectifier, pm.plan, bb_emb, pm.real_adj,
                                     with_caches=True)
    paths = []
    for tag, layers in (("backbone", bb_emb), ("rectifier", rect_outs)):
        for k, h in enumerate(layers):
            proj = pca2(h)
            cols = np.column_stack([h.astype(np.float64), proj,
                                    graph.labels.astype(np.float64)])
            header = ",".join([f"e{i}" for i in range(h.shape[1])]
                              + ["pca0", "pca1", "label"])
            path = out / f"{tag}_layer{k + 1}.csv"
            np.savetxt(path, cols, delimiter=",", header=header, comments="")
            paths.append(path)
    return paths
