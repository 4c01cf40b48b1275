"""Two-world inference: untrusted backbone, sealed vault rectifier.

The vault is a simulated enclave: a single-threaded execution context with
its own memory ledger (adjacency kept in COO plus precomputed degrees) and
a one-way channel from the untrusted world. Only argmax class indices ever
leave it. Everything the untrusted side observes lands on a tape so leak
audits can replay it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError
from .graph import Graph, NormalizedAdjacency
from .models import (GcnModel, ModelSpec, PartitionedModel, backbone_dims,
                     backbone_forward, required_backbone_layers)
from .nn import layer_forward

DIRECTION = "untrusted->vault"
DEFAULT_EPC_MB = 96.0


@dataclass(frozen=True)
class Transfer:
    tag: str
    shape: tuple[int, int]
    n_bytes: int
    direction: str = DIRECTION


@dataclass
class ChannelRecord:
    transfers: list[Transfer] = field(default_factory=list)

    @property
    def total_bytes(self) -> int:
        return sum(t.n_bytes for t in self.transfers)

    def directions(self) -> set[str]:
        return {t.direction for t in self.transfers}


@dataclass(frozen=True)
class TapeEntry:
    """One datum visible in the untrusted world."""

    kind: str       # "embedding" | "transfer" | "labels" | "leak"
    origin: str     # "untrusted" | "vault"
    tag: str
    dtype: str
    shape: tuple


class MemoryLedger:
    """Byte accounting for the vault; raises when peak crosses the budget."""

    CATEGORIES = ("input features", "adjacency COO", "parameters", "activations")

    def __init__(self, budget_bytes: int | None = None):
        self.budget_bytes = budget_bytes
        self.current = 0
        self.peak = 0
        self.categories = {c: 0 for c in self.CATEGORIES}
        self.category_peaks = {c: 0 for c in self.CATEGORIES}

    def alloc(self, category: str, n_bytes: int) -> None:
        self.categories[category] += n_bytes
        self.current += n_bytes
        self.peak = max(self.peak, self.current)
        self.category_peaks[category] = max(self.category_peaks[category],
                                            self.categories[category])
        if self.budget_bytes is not None and self.peak > self.budget_bytes:
            raise BudgetExceededError(self.peak, self.budget_bytes)

    def free(self, category: str, n_bytes: int) -> None:
        if self.categories[category] < n_bytes:
            raise ValueError(f"freeing more {category!r} bytes than allocated")
        self.categories[category] -= n_bytes
        self.current -= n_bytes

    def to_dict(self) -> dict:
        return {
            "peak_bytes": self.peak,
            "current_bytes": self.current,
            "categories": dict(self.categories),
            "category_peaks": dict(self.category_peaks),
        }


class _ActivationTracker:
    def __init__(self, ledger: MemoryLedger):
        self.ledger = ledger

    def alloc_array(self, arr: np.ndarray) -> None:
        self.ledger.alloc("activations", arr.nbytes)

    def free_array(self, arr: np.ndarray) -> None:
        self.ledger.free("activations", arr.nbytes)


@dataclass(frozen=True)
class CostModel:
    """Simulated channel cost: fixed per call plus linear in bytes."""

    per_call_s: float = 10e-6
    per_byte_s: float = 1e-9


@dataclass
class TimingBreakdown:
    backbone_s: float = 0.0
    transfer_s: float = 0.0
    vault_s: float = 0.0

    def to_dict(self) -> dict:
        return {"backbone_s": self.backbone_s, "transfer_s": self.transfer_s,
                "vault_s": self.vault_s}


@dataclass
class RunReport:
    labels: np.ndarray
    channel: ChannelRecord
    memory: MemoryLedger
    timing: TimingBreakdown
    tape: list[TapeEntry]

    def to_dict(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "channel": [{"tag": t.tag, "shape": list(t.shape),
                         "bytes": t.n_bytes, "direction": t.direction}
                        for t in self.channel.transfers],
            "memory": self.memory.to_dict(),
            "timing": self.timing.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_partitioned(pm: PartitionedModel, graph: Graph,
                    query_nodes: np.ndarray | list[int],
                    epc_budget_mb: float = DEFAULT_EPC_MB,
                    cost: CostModel = CostModel(),
                    _leak_hook=None) -> RunReport:
    """Whole-graph partitioned inference returning labels for query_nodes.

    The vault holds: real adjacency in COO with precomputed degrees,
    rectifier parameters, the embeddings received over the channel, and
    per-layer activations. Buffers are freed as soon as the wiring plan
    stops referencing them; every allocation is charged to the ledger and
    checked against the enclave budget.
    """
    query = np.asarray(query_nodes, dtype=np.int64)
    if query.size and (query.min() < 0 or query.max() >= graph.n_nodes):
        raise ValueError("query node index out of range")
    tape: list[TapeEntry] = []
    timing = TimingBreakdown()

    # ---- untrusted world -------------------------------------------------
    t0 = time.perf_counter()
    bb_emb = backbone_forward(pm.backbone, graph.features,
                              pm.sub_adj if pm.backbone.kind == "gcn" else None)
    timing.backbone_s = time.perf_counter() - t0
    for i, h in enumerate(bb_emb):
        tape.append(TapeEntry("embedding", "untrusted", f"backbone_h{i + 1}",
                              str(h.dtype), h.shape))

    # ---- channel ---------------------------------------------------------
    needed = required_backbone_layers(pm.plan)
    channel = ChannelRecord()
    ledger = MemoryLedger(budget_bytes=int(epc_budget_mb * 2**20))
    ledger.alloc("adjacency COO", pm.real_adj.nbytes_coo)
    ledger.alloc("adjacency COO", pm.real_adj.degrees.nbytes)
    ledger.alloc("parameters", sum(x.nbytes for x in pm.rectifier.param_tensors()))
    received: dict[int, np.ndarray] = {}
    for i in needed:
        h = bb_emb[i]
        channel.transfers.append(Transfer(f"backbone_h{i + 1}",
                                          (h.shape[0], h.shape[1]), h.nbytes))
        tape.append(TapeEntry("transfer", "untrusted", f"backbone_h{i + 1}",
                              str(h.dtype), h.shape))
        ledger.alloc("input features", h.nbytes)
        received[i] = h
    timing.transfer_s = (cost.per_call_s * len(channel.transfers)
                         + cost.per_byte_s * channel.total_bytes)

    # ---- vault -----------------------------------------------------------
    t1 = time.perf_counter()
    last_use_bb = {i: max(k for k, layer in enumerate(pm.plan)
                          for kind, j in layer if kind == "bb" and j == i)
                   for i in needed}
    last_use_rect = {}
    for k, layer in enumerate(pm.plan):
        for kind, j in layer:
            if kind == "rect":
                last_use_rect[j] = k
    tracker = _ActivationTracker(ledger)
    rect_outs: dict[int, np.ndarray] = {}
    n_layers = pm.rectifier.n_layers
    for k in range(n_layers):
        parts = []
        for kind, i in pm.plan[k]:
            parts.append(received[i] if kind == "bb" else rect_outs[i])
        out, _ = layer_forward(pm.real_adj, parts, pm.rectifier.layers[k],
                               pm.rectifier.activations[k], tracker=tracker)
        rect_outs[k] = out
        for i, last in list(last_use_bb.items()):
            if last == k:
                ledger.free("input features", received.pop(i).nbytes)
                del last_use_bb[i]
        for j, last in list(last_use_rect.items()):
            if last == k:
                ledger.free("activations", rect_outs.pop(j).nbytes)
                del last_use_rect[j]
    logits = rect_outs.pop(n_layers - 1)
    if _leak_hook is not None:
        _leak_hook(tape, logits)
    predicted = logits.argmax(axis=1).astype(np.int64)
    ledger.free("activations", logits.nbytes)
    timing.vault_s = time.perf_counter() - t1

    labels = predicted[query]
    tape.append(TapeEntry("labels", "vault", "predicted_labels",
                          str(labels.dtype), labels.shape))
    return RunReport(labels, channel, ledger, timing, tape)


def audit_no_leak(report: RunReport) -> bool:
    """True iff nothing vault-made except integer labels reached the tape."""
    for t in report.channel.transfers:
        if t.direction != DIRECTION or not t.tag.startswith("backbone_"):
            return False
    for e in report.tape:
        if e.origin == "vault":
            if e.kind != "labels" or not np.issubdtype(np.dtype(e.dtype), np.integer):
                return False
    return True


@dataclass(frozen=True)
class GraphStats:
    """Shape-only stand-in for a Graph (lets reports cover datasets we
    do not hold in memory)."""

    n_nodes: int
    n_features: int
    n_classes: int


# A dense adjacency held as framework COO triplets costs 24 bytes per
# entry (two 64-bit indices plus a 64-bit value); that convention is what
# the published per-dataset dense-A megabyte figures follow.
DENSE_ADJ_BYTES_PER_ENTRY = 24


def dense_adjacency_mb(n_nodes: int) -> float:
    return n_nodes * n_nodes * DENSE_ADJ_BYTES_PER_ENTRY / 2**20


@dataclass
class InfeasibilityReport:
    features_bytes: int
    dense_adjacency_bytes: int
    parameter_bytes: int
    activation_bytes: int
    total_bytes: int
    budget_bytes: int

    @property
    def exceeds_budget(self) -> bool:
        return self.total_bytes > self.budget_bytes

    def to_dict(self) -> dict:
        return {**self.__dict__, "exceeds_budget": self.exceeds_budget,
                "total_mb": self.total_bytes / 2**20}


def infeasibility_report(graph, model: GcnModel | ModelSpec,
                         epc_budget_mb: float = DEFAULT_EPC_MB) -> InfeasibilityReport:
    """Ledger arithmetic for hosting the FULL model + graph in the vault."""
    n, d = graph.n_nodes, graph.n_features
    if isinstance(model, ModelSpec):
        dims = backbone_dims(model)
    else:
        dims = [(p.d_in, p.d_out) for p in model.layers]
    ledger = MemoryLedger()
    ledger.alloc("input features", n * d * 4)
    ledger.alloc("adjacency COO", n * n * DENSE_ADJ_BYTES_PER_ENTRY)
    ledger.alloc("parameters", sum(i * o + o for i, o in dims) * 4)
    for _, d_out in dims:
        ledger.alloc("activations", n * d_out * 4)  # every layer retained
    return InfeasibilityReport(
        features_bytes=ledger.categories["input features"],
        dense_adjacency_bytes=ledger.categories["adjacency COO"],
        parameter_bytes=ledger.categories["parameters"],
        activation_bytes=ledger.categories["activations"],
        total_bytes=ledger.peak,
        budget_bytes=int(epc_budget_mb * 2**20),
    )
