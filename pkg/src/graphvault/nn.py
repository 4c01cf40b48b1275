"""Dense/sparse linear algebra and hand-differentiated layers.

One layer computes out = act(spmm(adj, sum_s parts[s] @ W[s]) + b) where
W is split row-wise by the widths of the input parts; adj=None gives the
plain dense layer. Both the trainer and the vault inference path call the
same kernels, so partitioned and monolithic runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMaskError, NonFiniteError
from .graph import NormalizedAdjacency

ACTIVATIONS = ("relu", "none")


@dataclass
class LayerParams:
    weight: np.ndarray          # (d_in_total, d_out)
    bias: np.ndarray            # (d_out,)

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    @property
    def n_params(self) -> int:
        return self.weight.size + self.bias.size

    def astype(self, dtype) -> "LayerParams":
        return LayerParams(self.weight.astype(dtype), self.bias.astype(dtype))


def glorot(d_in: int, d_out: int, rng: np.random.Generator,
           dtype=np.float32) -> LayerParams:
    """Uniform Glorot init scaled by fan-in + fan-out."""
    limit = np.sqrt(6.0 / (d_in + d_out))
    w = rng.uniform(-limit, limit, size=(d_in, d_out)).astype(dtype)
    return LayerParams(w, np.zeros(d_out, dtype=dtype))


def spmm(adj: NormalizedAdjacency, h: np.ndarray) -> np.ndarray:
    """Sparse COO times dense, exact over the stored triplets."""
    if adj.n != h.shape[0]:
        raise ValueError(f"adjacency n={adj.n} vs h rows={h.shape[0]}")
    out = np.zeros((adj.n, h.shape[1]), dtype=h.dtype)
    np.add.at(out, adj.rows, adj.vals.astype(h.dtype)[:, None] * h[adj.cols])
    return out


def _split_weight(weight: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    if sum(widths) != weight.shape[0]:
        raise ValueError(f"input widths {widths} do not fill weight rows {weight.shape[0]}")
    return np.split(weight, np.cumsum(widths)[:-1], axis=0)


def affine_parts(parts: list[np.ndarray], params: LayerParams) -> np.ndarray:
    """sum_s parts[s] @ W[s] + b without materializing the concatenation."""
    blocks = _split_weight(params.weight, [p.shape[1] for p in parts])
    lin = parts[0] @ blocks[0]
    for p, w in zip(parts[1:], blocks[1:]):
        lin += p @ w
    lin += params.bias
    return lin


@dataclass
class LayerCache:
    parts: list[np.ndarray]
    pre_act: np.ndarray
    adj: NormalizedAdjacency | None
    activation: str


def layer_forward(adj: NormalizedAdjacency | None, parts: list[np.ndarray],
                  params: LayerParams, activation: str,
                  tracker=None) -> tuple[np.ndarray, LayerCache]:
    """out = act(adj @ (sum_s parts[s] W[s]) + b); adj=None skips propagation.

    `tracker`, when given, is told about every intermediate buffer via
    alloc_array/free_array (used by the vault's memory ledger). The math
    is identical with or without it.
    """
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    blocks = _split_weight(params.weight, [p.shape[1] for p in parts])
    lin = parts[0] @ blocks[0]
    for p, w in zip(parts[1:], blocks[1:]):
        lin += p @ w
    if tracker is not None:
        tracker.alloc_array(lin)
    if adj is not None:
        prop = spmm(adj, lin)
        if tracker is not None:
            tracker.alloc_array(prop)
            tracker.free_array(lin)
        lin = prop
    lin += params.bias
    if not np.all(np.isfinite(lin)):
        raise NonFiniteError("layer produced NaN/Inf")
    if activation == "relu":
        np.maximum(lin, 0, out=lin)
    # relu applied in place: (lin > 0) still recovers the gradient mask
    return lin, LayerCache(parts, lin, adj, activation)


def layer_backward(cache: LayerCache, params: LayerParams,
                   grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Gradients (per-part grad_in list, grad_weight, grad_bias)."""
    dz = grad_out * (cache.pre_act > 0) if cache.activation == "relu" else grad_out
    grad_b = dz.sum(axis=0)
    dt = spmm(cache.adj, dz) if cache.adj is not None else dz
    widths = [p.shape[1] for p in cache.parts]
    blocks = _split_weight(params.weight, widths)
    grad_w = np.concatenate([p.T @ dt for p in cache.parts], axis=0)
    grad_parts = [dt @ w.T for w in blocks]
    return grad_parts, grad_w, grad_b


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def masked_softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                                 mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean NLL over masked rows; gradient is zero off the mask."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptyMaskError("loss mask selects no nodes")
    sub = logits[idx]
    shifted = sub - sub.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    nll = log_z - shifted[np.arange(idx.size), labels[idx]]
    loss = float(nll.mean())
    grad = np.zeros_like(logits)
    p = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    p[np.arange(idx.size), labels[idx]] -= 1.0
    grad[idx] = p / idx.size
    return loss, grad


@dataclass
class AdamState:
    """Adaptive-moment state with decoupled weight decay."""

    lr: float = 0.01
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def _ensure(self, tensors: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(x) for x in tensors]
            self.v = [np.zeros_like(x) for x in tensors]


def adam_step(tensors: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> None:
    """In-place update of tensors; decay applies to every tensor."""
    state._ensure(tensors)
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for x, g, m, v in zip(tensors, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        step = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay:
            step = step + state.weight_decay * x
        x -= (state.lr * step).astype(x.dtype)


def count_parameters(layers: list[LayerParams]) -> int:
    return sum(p.n_params for p in layers)
