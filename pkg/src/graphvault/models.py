"""Model families, rectifier wiring plans, and model-file serialization.

Widths per family (C = label count):
  M1 backbone (128, 32, C),        rectifier (128, 32, C)
  M2 backbone (256, 128, C),       rectifier (128, 32, C)
  M3 backbone (256, 64, 32, 16, C) rectifier (64, 32, C)
  mlp: dense baseline reusing a GCN family's backbone widths

Rectifier input wiring:
  parallel  layer 1 reads backbone embedding 1; layer k concatenates the
            previous rectifier output with backbone embedding k (a deeper
            backbone only feeds its first R layers)
  cascaded  layer 1 concatenates every backbone embedding
  series    layer 1 reads the penultimate backbone embedding
Rectifier layers always propagate through the real adjacency.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagicError, ChecksumError, TruncatedError
from .graph import NormalizedAdjacency
from .nn import LayerCache, LayerParams, count_parameters, glorot, layer_forward
from .substitute import SubstituteSpec

FAMILY_WIDTHS = {
    "M1": {"backbone": (128, 32), "rectifier": (128, 32)},
    "M2": {"backbone": (256, 128), "rectifier": (128, 32)},
    "M3": {"backbone": (256, 64, 32, 16), "rectifier": (64, 32)},
}
TOPOLOGIES = ("parallel", "cascaded", "series")
_ACT_TAGS = {"none": 0, "relu": 1}
_TAG_ACTS = {v: k for k, v in _ACT_TAGS.items()}
MODEL_MAGIC = b"GVMD"


@dataclass(frozen=True)
class ModelSpec:
    family: str                     # M1 | M2 | M3 | mlp
    backbone_widths: tuple[int, ...]  # hidden widths then C
    rectifier_widths: tuple[int, ...]
    n_classes: int
    feature_dim: int


def make_spec(family: str, feature_dim: int, n_classes: int,
              base_family: str = "M1") -> ModelSpec:
    key = base_family if family == "mlp" else family
    if key not in FAMILY_WIDTHS:
        raise ValueError(f"unknown model family {family!r}")
    w = FAMILY_WIDTHS[key]
    return ModelSpec(
        family=family,
        backbone_widths=tuple(w["backbone"]) + (n_classes,),
        rectifier_widths=tuple(w["rectifier"]) + (n_classes,),
        n_classes=n_classes,
        feature_dim=feature_dim,
    )


# A wiring plan is one segment list per rectifier layer; each segment is
# ("bb", i) for backbone embedding i or ("rect", k) for rectifier output k.
Segment = tuple[str, int]


def rectifier_plan(topology: str, n_backbone: int, n_rectifier: int) -> list[list[Segment]]:
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if topology == "parallel":
        if n_rectifier > n_backbone:
            raise ValueError("parallel rectifier deeper than backbone")
        plan: list[list[Segment]] = [[("bb", 0)]]
        for k in range(1, n_rectifier):
            plan.append([("rect", k - 1), ("bb", k)])
        return plan
    if topology == "cascaded":
        plan = [[("bb", i) for i in range(n_backbone)]]
    else:  # series
        if n_backbone < 2:
            raise ValueError("series wiring needs a >=2 layer backbone")
        plan = [[("bb", n_backbone - 2)]]
    for k in range(1, n_rectifier):
        plan.append([("rect", k - 1)])
    return plan


def required_backbone_layers(plan: list[list[Segment]]) -> list[int]:
    """Backbone embedding indices that must cross into the vault."""
    return sorted({i for layer in plan for kind, i in layer if kind == "bb"})


def _chain_dims(widths: tuple[int, ...], d_in: int) -> list[tuple[int, int]]:
    dims = []
    prev = d_in
    for w in widths:
        dims.append((prev, w))
        prev = w
    return dims


def backbone_dims(spec: ModelSpec) -> list[tuple[int, int]]:
    return _chain_dims(spec.backbone_widths, spec.feature_dim)


def rectifier_dims(spec: ModelSpec, topology: str) -> list[tuple[int, int]]:
    bw = spec.backbone_widths
    rw = spec.rectifier_widths
    plan = rectifier_plan(topology, len(bw), len(rw))
    dims = []
    for k, segments in enumerate(plan):
        d_in = 0
        for kind, i in segments:
            d_in += bw[i] if kind == "bb" else rw[i]
        dims.append((d_in, rw[k]))
    return dims


def backbone_param_count(spec: ModelSpec) -> int:
    return sum(i * o + o for i, o in backbone_dims(spec))


def rectifier_param_count(spec: ModelSpec, topology: str) -> int:
    return sum(i * o + o for i, o in rectifier_dims(spec, topology))


@dataclass
class GcnModel:
    layers: list[LayerParams]
    activations: list[str]
    kind: str = "gcn"               # "gcn" propagates, "mlp" does not
    frozen: bool = False

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def param_tensors(self) -> list[np.ndarray]:
        out = []
        for p in self.layers:
            out.extend((p.weight, p.bias))
        return out

    def param_bytes(self) -> bytes:
        return b"".join(x.tobytes() for x in self.param_tensors())

    def n_params(self) -> int:
        return count_parameters(self.layers)


def _build_chain(dims: list[tuple[int, int]], kind: str,
                 rng: np.random.Generator, dtype=np.float32) -> GcnModel:
    layers = [glorot(i, o, rng, dtype) for i, o in dims]
    acts = ["relu"] * (len(dims) - 1) + ["none"]
    return GcnModel(layers, acts, kind=kind)


def build_backbone(spec: ModelSpec, rng: np.random.Generator,
                   dtype=np.float32) -> GcnModel:
    kind = "mlp" if spec.family == "mlp" else "gcn"
    return _build_chain(backbone_dims(spec), kind, rng, dtype)


def build_original(spec: ModelSpec, rng: np.random.Generator,
                   dtype=np.float32) -> GcnModel:
    """Unprotected reference model: backbone architecture on the real graph."""
    return _build_chain(backbone_dims(spec), "gcn", rng, dtype)


def build_rectifier(spec: ModelSpec, topology: str, rng: np.random.Generator,
                    dtype=np.float32) -> GcnModel:
    return _build_chain(rectifier_dims(spec, topology), "gcn", rng, dtype)


def backbone_forward(model: GcnModel, x: np.ndarray,
                     adj: NormalizedAdjacency | None) -> list[np.ndarray]:
    """Every layer's embedding, logits last. adj ignored for mlp models."""
    use_adj = adj if model.kind == "gcn" else None
    if model.kind == "gcn" and adj is None:
        raise ValueError("gcn backbone needs an adjacency")
    h = x.astype(model.layers[0].weight.dtype, copy=False)
    embeddings = []
    for params, act in zip(model.layers, model.activations):
        h, _ = layer_forward(use_adj, [h], params, act)
        embeddings.append(h)
    return embeddings


def rectifier_forward(rectifier: GcnModel, plan: list[list[Segment]],
                      bb_embeddings: list[np.ndarray],
                      real_adj: NormalizedAdjacency,
                      with_caches: bool = False):
    """Logits from backbone embeddings via the wiring plan and real graph."""
    rect_outs: list[np.ndarray] = []
    caches: list[LayerCache] = []
    for k, (params, act) in enumerate(zip(rectifier.layers, rectifier.activations)):
        parts = []
        for kind, i in plan[k]:
            parts.append(bb_embeddings[i] if kind == "bb" else rect_outs[i])
        out, cache = layer_forward(real_adj, parts, params, act)
        rect_outs.append(out)
        caches.append(cache)
    if with_caches:
        return rect_outs, caches
    return rect_outs[-1]


def mlp_forward(model: GcnModel, x: np.ndarray) -> list[np.ndarray]:
    if model.kind != "mlp":
        raise ValueError("model is not an mlp")
    return backbone_forward(model, x, None)


@dataclass
class PartitionedModel:
    """Trained backbone + rectifier pair with their graph views."""

    spec: ModelSpec
    topology: str
    backbone: GcnModel
    rectifier: GcnModel
    substitute_spec: SubstituteSpec
    sub_adj: NormalizedAdjacency
    real_adj: NormalizedAdjacency
    seed: int = 0
    plan: list[list[Segment]] = field(init=False)

    def __post_init__(self):
        self.plan = rectifier_plan(self.topology, self.backbone.n_layers,
                                   self.rectifier.n_layers)


def write_model(model: GcnModel, path: str | Path) -> None:
    header = [MODEL_MAGIC, struct.pack("<HH", 1, model.n_layers)]
    for p, act in zip(model.layers, model.activations):
        header.append(struct.pack("<IIB", p.d_in, p.d_out, _ACT_TAGS[act]))
    blobs = []
    for p in model.layers:
        blobs.append(np.ascontiguousarray(p.weight, dtype="<f4").tobytes())
        blobs.append(np.ascontiguousarray(p.bias, dtype="<f4").tobytes())
    body = b"".join(header + blobs)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def read_model(path: str | Path, kind: str = "gcn") -> GcnModel:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise TruncatedError(f"{path}: too short for a model file")
    if raw[:4] != MODEL_MAGIC:
        raise BadMagicError(f"{path}: not a GVMD model file")
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != struct.unpack("<I", raw[-4:])[0]:
        raise ChecksumError(f"{path}: model CRC mismatch")
    version, n_layers = struct.unpack("<HH", raw[4:8])
    if version != 1:
        raise BadMagicError(f"unsupported model version {version}")
    pos = 8
    dims = []
    for _ in range(n_layers):
        d_in, d_out, tag = struct.unpack("<IIB", raw[pos:pos + 9])
        dims.append((d_in, d_out, _TAG_ACTS[tag]))
        pos += 9
    layers, acts = [], []
    for d_in, d_out, act in dims:
        w = np.frombuffer(raw, dtype="<f4", count=d_in * d_out, offset=pos)
        pos += 4 * d_in * d_out
        b = np.frombuffer(raw, dtype="<f4", count=d_out, offset=pos)
        pos += 4 * d_out
        layers.append(LayerParams(w.reshape(d_in, d_out).copy(), b.copy()))
        acts.append(act)
    return GcnModel(layers, acts, kind=kind)


def save_partitioned(pm: PartitionedModel, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_model(pm.backbone, out / "backbone.gvmd")
    write_model(pm.rectifier, out / "rectifier.gvmd")
    manifest = {
        "schema_version": 1,
        "family": pm.spec.family,
        "topology": pm.topology,
        "backbone_widths": list(pm.spec.backbone_widths),
        "rectifier_widths": list(pm.spec.rectifier_widths),
        "n_classes": pm.spec.n_classes,
        "feature_dim": pm.spec.feature_dim,
        "substitute": pm.substitute_spec.to_dict(),
        "seed": pm.seed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_partitioned(model_dir: str | Path, graph) -> PartitionedModel:
    """Rebuild a PartitionedModel against a graph (adjacencies recomputed)."""
    from .graph import normalize
    from .substitute import build_substitute

    mdir = Path(model_dir)
    manifest = json.loads((mdir / "manifest.json").read_text())
    spec = ModelSpec(
        family=manifest["family"],
        backbone_widths=tuple(manifest["backbone_widths"]),
        rectifier_widths=tuple(manifest["rectifier_widths"]),
        n_classes=manifest["n_classes"],
        feature_dim=manifest["feature_dim"],
    )
    sub_spec = SubstituteSpec.from_dict(manifest["substitute"])
    kind = "mlp" if spec.family == "mlp" else "gcn"
    backbone = read_model(mdir / "backbone.gvmd", kind=kind)
    backbone.frozen = True
    rectifier = read_model(mdir / "rectifier.gvmd")
    if kind == "mlp":  # the dense baseline never had a substitute graph
        sub_adj = normalize(graph.replace_edges(np.zeros((0, 2), dtype=np.uint32)))
    else:
        sub_adj = normalize(build_substitute(graph, sub_spec))
    real_adj = normalize(graph)
    return PartitionedModel(spec, manifest["topology"], backbone, rectifier,
                            sub_spec, sub_adj, real_adj, seed=manifest["seed"])
