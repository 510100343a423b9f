"""Layer graphs: inputs, layers, dropout and concatenation nodes with weighted loss heads.

Networks are described by a JSON-able dict (``inputs``, ``nodes``, ``heads``,
``output``) so they can be rebuilt from a model file. Presets expand to that
form via :func:`preset`.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ..data import MaskedMatrix, ModalDataset, rng_for
from ..errors import ShapeError, SpecError
from . import layers as L

LOSSES = {"bce": "sigmoid", "cce": "softmax", "mse": "linear"}


@dataclass(eq=False)
class Node:
    name: str
    op: str
    srcs: tuple[str, ...] = ()
    width: int = 0
    layer: L.Layer | None = None
    rate: float = 0.0


@dataclass(frozen=True)
class Head:
    node: str
    loss: str
    weight: float = 1.0


def _raw(x) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, MaskedMatrix):
        return x.filled(), x.mask
    if isinstance(x, tuple):
        return x
    a = np.asarray(x, dtype=np.float64)
    mask = np.isnan(a)
    return np.where(mask, 0.0, a), mask


class Network:
    """A directed acyclic graph of nodes kept in topological order."""

    def __init__(self, desc: dict, seed: int = 0):
        self.desc = copy.deepcopy(desc)
        self.nodes: list[Node] = []
        self.heads: list[Head] = [Head(h["node"], h["loss"], float(h.get("weight", 1.0)))
                                  for h in desc["heads"]]
        self.output: str = desc["output"]
        self._build()
        self.init_params(seed)

    # construction ---------------------------------------------------------

    def _build(self):
        by_name: dict[str, Node] = {}

        def add(node: Node):
            if node.name in by_name:
                raise SpecError(f"duplicate node name {node.name!r}")
            for s in node.srcs:
                if s not in by_name:
                    raise SpecError(f"node {node.name!r} reads {s!r}, which is not defined before it")
            by_name[node.name] = node
            self.nodes.append(node)

        for inp in self.desc["inputs"]:
            add(Node(inp["name"], "input", (), int(inp["width"])))
        for d in self.desc["nodes"]:
            op = d["op"]
            if op in ("dense", "nan_dense"):
                src = by_name.get(d["src"])
                if src is None:
                    raise SpecError(f"node {d['name']!r} reads unknown {d['src']!r}")
                if op == "nan_dense" and not self._fed_by_input(src, by_name):
                    raise SpecError(f"nan_dense node {d['name']!r} must be fed by an input")
                units = int(d["units"])
                if units < 1 or src.width < 1:
                    raise SpecError(f"node {d['name']!r} has an empty shape")
                mode = d.get("mode", "promissing") if op == "nan_dense" else None
                layer = L.Layer(np.zeros((units, src.width)), np.zeros(units),
                                d.get("transfer", "linear"), op, mode)
                add(Node(d["name"], "layer", (d["src"],), units, layer))
            elif op == "dropout":
                src = by_name.get(d["src"])
                if src is None:
                    raise SpecError(f"node {d['name']!r} reads unknown {d['src']!r}")
                add(Node(d["name"], "dropout", (d["src"],), src.width, rate=float(d["rate"])))
            elif op == "concat":
                missing = [s for s in d["srcs"] if s not in by_name]
                if missing:
                    raise SpecError(f"concat {d['name']!r} reads unknown {missing}")
                if any(by_name[s].op == "input" for s in d["srcs"]):
                    raise SpecError("concat of raw inputs is not supported")
                add(Node(d["name"], "concat", tuple(d["srcs"]),
                         sum(by_name[s].width for s in d["srcs"])))
            else:
                raise SpecError(f"unknown node op {op!r}")
        self._by_name = by_name
        if self.output not in by_name:
            raise SpecError(f"output node {self.output!r} undefined")
        for h in self.heads:
            node = by_name.get(h.node)
            if node is None or node.op != "layer":
                raise SpecError(f"loss head must sit on a layer node, got {h.node!r}")
            if h.loss not in LOSSES or node.layer.transfer != LOSSES[h.loss]:
                raise SpecError(f"loss {h.loss!r} needs a {LOSSES.get(h.loss)} layer at {h.node!r}")
            if h.loss == "bce" and node.width != 1:
                raise SpecError("bce head needs a single output unit")
        if not self.heads:
            raise SpecError("network has no loss head")

    @staticmethod
    def _fed_by_input(node: Node, by_name) -> bool:
        while node.op == "dropout":
            node = by_name[node.srcs[0]]
        return node.op == "input"

    def init_params(self, seed: int) -> None:
        """Glorot-uniform weights, zero biases and compensatory weights."""
        rng = rng_for(seed, "init")
        for node in self.nodes:
            if node.op == "layer":
                lay = node.layer
                fresh = L.Layer.glorot(lay.p, lay.s, rng, transfer=lay.transfer,
                                       kind=lay.kind, mode=lay.mode)
                lay.W[...] = fresh.W
                lay.b[...] = 0.0
                if lay.wc is not None:
                    lay.wc[...] = 0.0

    # accessors --------------------------------------------------------------

    @property
    def input_names(self) -> list[str]:
        return [n.name for n in self.nodes if n.op == "input"]

    @property
    def input_widths(self) -> dict[str, int]:
        return {n.name: n.width for n in self.nodes if n.op == "input"}

    def node(self, name: str) -> Node:
        return self._by_name[name]

    def layers(self) -> dict[str, L.Layer]:
        return {n.name: n.layer for n in self.nodes if n.op == "layer"}

    def params(self) -> dict[str, np.ndarray]:
        return {f"{name}.{k}": v for name, lay in self.layers().items() for k, v in lay.params().items()}

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.params().values())

    def copy(self) -> "Network":
        net = Network(self.desc)
        for k, v in self.params().items():
            net.params()[k][...] = v
        return net

    def normalize_inputs(self, data) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        if isinstance(data, ModalDataset):
            data = data.as_inputs()
        if not isinstance(data, dict):
            if len(self.input_names) != 1:
                raise ShapeError(f"network has inputs {self.input_names}; pass a dict")
            data = {self.input_names[0]: data}
        out = {}
        for name, width in self.input_widths.items():
            if name not in data:
                raise ShapeError(f"missing input {name!r}")
            v, m = _raw(data[name])
            if v.ndim != 2 or v.shape[1] != width:
                raise ShapeError(f"input {name!r} expects {width} columns, got {v.shape}")
            out[name] = (v, m)
        return out

    # computation ------------------------------------------------------------

    def forward(self, inputs: dict, train: bool = False, rng: np.random.Generator | None = None):
        """Run every node; returns ``{name: (output, cache)}``.

        ``inputs`` maps input names to ``(filled values, mask)`` tuples (see
        :meth:`normalize_inputs`). Dropout is active only when ``train`` and
        ``rng`` are both given.
        """
        acts: dict[str, tuple] = {}
        for node in self.nodes:
            if node.op == "input":
                acts[node.name] = (inputs[node.name], None)
            elif node.op == "layer":
                out, cache = L.forward(node.layer, acts[node.srcs[0]][0])
                acts[node.name] = (out, cache)
            elif node.op == "dropout":
                x = acts[node.srcs[0]][0]
                if not (train and rng is not None and node.rate > 0):
                    acts[node.name] = (x, None)
                    continue
                v = x[0] if isinstance(x, tuple) else x
                keep = (rng.random(v.shape) >= node.rate) / (1.0 - node.rate)
                acts[node.name] = (((v * keep), x[1]) if isinstance(x, tuple) else v * keep, keep)
            else:
                acts[node.name] = (np.hstack([acts[s][0] for s in node.srcs]), None)
        return acts

    def _head_targets(self, head: Head, y: np.ndarray) -> np.ndarray:
        width = self._by_name[head.node].width
        if head.loss == "cce":
            Y = np.zeros((y.size, width))
            Y[np.arange(y.size), y.astype(int)] = 1.0
            return Y
        return y.reshape(-1, 1) if width == 1 else y

    def loss_and_grads(self, inputs: dict, y: np.ndarray, train: bool = False,
                       rng: np.random.Generator | None = None, grads: bool = True):
        """Total weighted loss over the heads and (optionally) parameter gradients."""
        acts = self.forward(inputs, train, rng)
        n = y.shape[0]
        total = 0.0
        d_pre: dict[str, np.ndarray] = {}
        for h in self.heads:
            _, cache = acts[h.node]
            z, out = cache["z"], cache["out"]
            T = self._head_targets(h, y)
            if h.loss == "bce":
                loss = np.mean(np.logaddexp(0.0, z) - T * z)
                g = (out - T) / n
            elif h.loss == "cce":
                zmax = z.max(axis=1, keepdims=True)
                log_p = z - zmax - np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))
                loss = -np.mean(np.sum(T * log_p, axis=1))
                g = (out - T) / n
            else:
                loss = np.mean((z - T) ** 2)
                g = 2.0 * (z - T) / z.size
            total += h.weight * float(loss)
            d_pre[h.node] = d_pre.get(h.node, 0.0) + h.weight * g
        if not grads:
            return total, None, acts
        return total, self._backward(acts, d_pre), acts

    def _backward(self, acts, d_pre) -> dict[str, np.ndarray]:
        d_out: dict[str, np.ndarray] = {}
        out: dict[str, np.ndarray] = {}

        def push(name, g):
            node = self._by_name[name]
            if node.op == "input" or (node.op == "dropout" and self._fed_by_input(node, self._by_name)):
                return
            d_out[name] = d_out[name] + g if name in d_out else g

        for node in reversed(self.nodes):
            if node.op == "layer":
                if node.name not in d_out and node.name not in d_pre:
                    g = {k: np.zeros_like(v) for k, v in node.layer.params().items()}
                else:
                    src = self._by_name[node.srcs[0]]
                    need_dx = not (src.op == "input" or self._fed_by_input(src, self._by_name))
                    g = L.backward(node.layer, acts[node.name][1], d_out.get(node.name),
                                   d_pre.get(node.name), need_dx)
                    if need_dx:
                        push(node.srcs[0], g.pop("x"))
                for k, v in g.items():
                    out[f"{node.name}.{k}"] = v
            elif node.op == "dropout" and node.name in d_out:
                keep = acts[node.name][1]
                push(node.srcs[0], d_out[node.name] if keep is None else d_out[node.name] * keep)
            elif node.op == "concat" and node.name in d_out:
                g, start = d_out[node.name], 0
                for s in node.srcs:
                    w = self._by_name[s].width
                    push(s, g[:, start:start + w])
                    start += w
        return out

    def predict(self, data) -> np.ndarray:
        """Output-node activations with dropout disabled."""
        inputs = self.normalize_inputs(data)
        return self.forward(inputs)[self.output][0]

    def predict_score(self, data) -> np.ndarray:
        """Positive-class probability (sigmoid or 2-way softmax) or regression output."""
        out = self.predict(data)
        return out[:, 1] if out.shape[1] == 2 else out[:, 0]


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

FUSION_REPRESENTATION = "relu"


def first_layer(method: str) -> dict:
    """Node fields for the input layer of a given missing-data method."""
    if method in ("promissing", "m_promissing"):
        return {"op": "nan_dense", "mode": method}
    return {"op": "dense"}


def preset(name: str, *, p: int | None = None, method: str = "promissing",
           task: str = "classification", modalities=None, head_weight: float = 1.0,
           dropout: float = 0.1, representation: str = FUSION_REPRESENTATION) -> dict:
    """Architecture description for the ``xor``, ``benchmark`` and ``fusion`` presets.

    ``method`` picks the first layer: ``promissing``/``m_promissing`` give
    nan_dense layers, anything else a plain dense layer (imputed inputs).
    ``modalities`` (fusion) is a list of ``(name, width, representation_units)``.
    """
    fl = first_layer(method)
    if name == "xor":
        return {
            "preset": "xor",
            "inputs": [{"name": "x", "width": p or 2}],
            "nodes": [{"name": "hidden", "src": "x", "units": 4, "transfer": "tanh", **fl},
                      {"name": "out", "op": "dense", "src": "hidden", "units": 1, "transfer": "sigmoid"}],
            "heads": [{"node": "out", "loss": "bce"}],
            "output": "out",
        }
    if name == "benchmark":
        if not p:
            raise SpecError("benchmark preset needs p")
        reg = task == "regression"
        return {
            "preset": "benchmark",
            "inputs": [{"name": "x", "width": p}],
            "nodes": [
                {"name": "hidden1", "src": "x", "units": math.ceil(p / 2), "transfer": "relu", **fl},
                {"name": "hidden2", "op": "dense", "src": "hidden1", "units": 2, "transfer": "relu"},
                {"name": "out", "op": "dense", "src": "hidden2", "units": 1,
                 "transfer": "linear" if reg else "sigmoid"},
            ],
            "heads": [{"node": "out", "loss": "mse" if reg else "bce"}],
            "output": "out",
        }
    if name == "fusion":
        if not modalities or len(modalities) < 2:
            raise SpecError("fusion preset needs at least two modalities")
        inputs, nodes, heads, merged = [], [], [], []
        for mod, width, units in modalities:
            inputs.append({"name": mod, "width": int(width)})
            nodes += [
                {"name": f"{mod}/drop_in", "op": "dropout", "src": mod, "rate": dropout},
                {"name": f"{mod}/rep", "src": f"{mod}/drop_in", "units": int(units),
                 "transfer": representation, **fl},
                {"name": f"{mod}/drop_rep", "op": "dropout", "src": f"{mod}/rep", "rate": dropout},
                {"name": f"{mod}/head", "op": "dense", "src": f"{mod}/drop_rep", "units": 2,
                 "transfer": "softmax"},
            ]
            heads.append({"node": f"{mod}/head", "loss": "cce", "weight": head_weight})
        merged = [f"{m}/rep" for m, _, _ in modalities] + [f"{m}/head" for m, _, _ in modalities]
        nodes += [
            {"name": "fusion/concat", "op": "concat", "srcs": merged},
            {"name": "fusion/drop", "op": "dropout", "src": "fusion/concat", "rate": dropout},
            {"name": "fusion/dense", "op": "dense", "src": "fusion/drop", "units": 5, "transfer": "relu"},
            {"name": "fusion/drop_out", "op": "dropout", "src": "fusion/dense", "rate": dropout},
            {"name": "out", "op": "dense", "src": "fusion/drop_out", "units": 2, "transfer": "softmax"},
        ]
        heads.append({"node": "out", "loss": "cce", "weight": 1.0})
        return {"preset": "fusion", "inputs": inputs, "nodes": nodes, "heads": heads, "output": "out"}
    raise SpecError(f"unknown preset {name!r}")


def build_network(spec: dict, seed: int = 0) -> Network:
    """Build from a full description, or from ``{"preset": name, **options}``."""
    if "nodes" not in spec:
        opts = dict(spec)
        spec = preset(opts.pop("preset"), **opts)
    return Network(spec, seed)
