"""Dense and missing-value-aware dense layers with hand-written gradients.

A ``nan_dense`` neuron k sees a row with observed set O (q = |O|, r = p - q)
and computes

    promissing:    a_k = sum_{i in O} x_i W[k, i] + q/p * b_k
    m_promissing:  a_k = sum_{i in O} x_i W[k, i] + (q * b_k + r * wc_k) / p

which is what substituting every missing x_j by the neutralizer
-b_k / (p W[k, j]) into an ordinary neuron gives, without the division.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..data import MaskedMatrix
from ..errors import MissingNotAllowedError, ShapeError, StateError

TRANSFERS = ("tanh", "sigmoid", "relu", "softmax", "linear")
MODES = ("promissing", "m_promissing")


@dataclass(eq=False)
class Layer:
    W: np.ndarray
    b: np.ndarray
    transfer: str = "linear"
    kind: str = "dense"
    mode: str | None = None
    wc: np.ndarray | None = None

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64, ndmin=2)
        self.b = np.array(self.b, dtype=np.float64).reshape(-1)
        if self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"bias of length {self.b.size} for {self.W.shape[0]} neurons")
        if self.transfer not in TRANSFERS:
            raise ValueError(f"unknown transfer {self.transfer!r}")
        if self.kind == "dense":
            if self.mode is not None or self.wc is not None:
                raise ValueError("dense layers take no mode or compensatory weights")
        elif self.kind == "nan_dense":
            if self.mode not in MODES:
                raise ValueError(f"nan_dense mode must be one of {MODES}")
            if self.mode == "m_promissing":
                wc = np.zeros(self.s) if self.wc is None else self.wc
                self.wc = np.array(wc, dtype=np.float64).reshape(-1)
                if self.wc.shape != (self.s,):
                    raise ShapeError("one compensatory weight per neuron")
            elif self.wc is not None:
                raise ValueError("compensatory weights only exist in m_promissing mode")
        else:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    @property
    def s(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        out = {"W": self.W, "b": self.b}
        if self.wc is not None:
            out["wc"] = self.wc
        return out

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.params().values())

    @classmethod
    def glorot(cls, p: int, s: int, rng: np.random.Generator, *, transfer="linear",
               kind="dense", mode=None) -> "Layer":
        limit = np.sqrt(6.0 / (p + s))
        W = rng.uniform(-limit, limit, size=(p, s)).T
        return cls(W, np.zeros(s), transfer, kind, mode)


# --------------------------------------------------------------------------
# transfer functions
# --------------------------------------------------------------------------

def activate(z: np.ndarray, transfer: str) -> np.ndarray:
    if transfer == "linear":
        return z
    if transfer == "tanh":
        return np.tanh(z)
    if transfer == "sigmoid":
        return expit(z)
    if transfer == "relu":
        return np.maximum(z, 0.0)
    if transfer == "softmax":
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown transfer {transfer!r}")


def transfer_grad(g: np.ndarray, z: np.ndarray, out: np.ndarray, transfer: str) -> np.ndarray:
    """Vector-Jacobian product of the transfer function."""
    if transfer == "linear":
        return g
    if transfer == "tanh":
        return g * (1.0 - out * out)
    if transfer == "sigmoid":
        return g * out * (1.0 - out)
    if transfer == "relu":
        return g * (z > 0)
    return out * (g - (g * out).sum(axis=1, keepdims=True))


def affine(x: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``x @ W.T`` accumulated feature by feature.

    Each output cell is built from its own row with a fixed summation order,
    so identical rows give bit-identical results wherever they sit in a batch.
    """
    n, p = x.shape
    out = np.zeros((n, W.shape[0]))
    for i in range(p):
        out += x[:, i:i + 1] * W[:, i]
    return out


# --------------------------------------------------------------------------
# forward / backward
# --------------------------------------------------------------------------

def _split(batch) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(batch, MaskedMatrix):
        return batch.values, batch.mask
    if isinstance(batch, tuple):
        return batch
    return np.asarray(batch, dtype=np.float64), None


def forward(layer: Layer, batch):
    """Return ``(activations, cache)``.

    ``batch`` is a :class:`MaskedMatrix`, a ``(values, mask)`` tuple, or a
    plain array (no missing cells).
    """
    values, mask = _split(batch)
    if values.ndim != 2 or values.shape[1] != layer.p:
        raise ShapeError(f"layer expects {layer.p} input columns, got shape {values.shape}")
    if layer.kind == "dense":
        if (mask is not None and mask.any()) or np.isnan(values).any():
            raise MissingNotAllowedError("missing cells reached a plain dense layer")
        z = affine(values, layer.W) + layer.b
        cache = {"x": values}
    else:
        if mask is None:
            mask = np.isnan(values)
        x = np.where(mask, 0.0, values)
        r = mask.sum(axis=1)
        qp = ((layer.p - r) / layer.p)[:, None]
        z = affine(x, layer.W) + qp * layer.b
        cache = {"x": x, "mask": mask, "qp": qp}
        if layer.mode == "m_promissing":
            rp = (r / layer.p)[:, None]
            z = z + rp * layer.wc
            cache["rp"] = rp
    out = activate(z, layer.transfer)
    cache.update(z=z, out=out)
    return out, cache


def backward(layer: Layer, cache: dict | None, d_out=None, d_pre=None, need_dx: bool = True):
    """Gradients of a scalar loss given ``d_out`` (w.r.t. activations) and/or
    ``d_pre`` (w.r.t. pre-activations, e.g. from a fused loss head).

    Returns a dict with ``W``, ``b``, optionally ``wc``, and ``x``. For
    ``nan_dense`` layers ``x`` is zero at missing cells.
    """
    if cache is None or "z" not in cache:
        raise StateError("backward called without a forward cache")
    g = np.zeros_like(cache["z"])
    if d_out is not None:
        g = g + transfer_grad(d_out, cache["z"], cache["out"], layer.transfer)
    if d_pre is not None:
        g = g + d_pre
    grads = {"W": g.T @ cache["x"]}
    if layer.kind == "dense":
        grads["b"] = g.sum(axis=0)
    else:
        grads["b"] = (g * cache["qp"]).sum(axis=0)
        if layer.mode == "m_promissing":
            grads["wc"] = (g * cache["rp"]).sum(axis=0)
    if need_dx:
        dx = g @ layer.W
        grads["x"] = np.where(cache["mask"], 0.0, dx) if layer.kind == "nan_dense" else dx
    return grads


def nan_dense_forward(layer: Layer, batch) -> np.ndarray:
    if layer.kind != "nan_dense":
        raise ValueError("nan_dense_forward needs a nan_dense layer")
    return forward(layer, batch)[0]


def nan_dense_backward(layer: Layer, cache: dict | None, upstream: np.ndarray) -> dict:
    if layer.kind != "nan_dense":
        raise ValueError("nan_dense_backward needs a nan_dense layer")
    return backward(layer, cache, d_out=upstream)


def dense_forward(layer: Layer, x) -> np.ndarray:
    return forward(layer, x)[0]


# --------------------------------------------------------------------------
# neutralizers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NeutralizerMatrix:
    U: np.ndarray
    epsilon: float

    def csv_rows(self):
        for k in range(self.U.shape[0]):
            for j in range(self.U.shape[1]):
                yield k, j, float(self.U[k, j])


def stabilize(W: np.ndarray, epsilon: float) -> np.ndarray:
    """Weights with |w| < epsilon pushed to +-epsilon (sign of 0 taken as +)."""
    sign = np.where(W < 0, -1.0, 1.0)
    return np.where(np.abs(W) >= epsilon, W, sign * epsilon)


def export_neutralizers(layer: Layer, epsilon: float = 1e-8) -> NeutralizerMatrix:
    """U[k, j] = -b_k / (p * w'_kj): the value a missing input j stands for at neuron k."""
    if layer.kind != "nan_dense":
        raise ValueError("neutralizers exist only for nan_dense layers")
    U = -layer.b[:, None] / (layer.p * stabilize(layer.W, epsilon))
    return NeutralizerMatrix(U, float(epsilon))


def substituted_preactivation(layer: Layer, batch, U: np.ndarray) -> np.ndarray:
    """Ordinary dense pre-activation after replacing each missing x_j by U[k, j] at neuron k."""
    values, mask = _split(batch)
    x = np.where(mask, 0.0, values)
    observed_part = x @ layer.W.T
    substituted = mask.astype(float) @ (U * layer.W).T
    return observed_part + substituted + layer.b
