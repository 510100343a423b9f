"""Text model files and neutralizer CSV export.

Model file layout (UTF-8, one record per line)::

    missnet-model 1
    arch <json architecture description>
    param <name> <comma-separated shape> <space-separated row-major values>

Values are written with ``repr`` so they round-trip bit for bit.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from .layers import NeutralizerMatrix, export_neutralizers
from .network import Network

MAGIC = "missnet-model"
VERSION = 1


def save_network(net: Network, path) -> None:
    lines = [f"{MAGIC} {VERSION}", "arch " + json.dumps(net.desc, sort_keys=True)]
    for name, arr in net.params().items():
        shape = ",".join(str(d) for d in arr.shape)
        lines.append(f"param {name} {shape} " + " ".join(repr(float(v)) for v in arr.ravel()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_network(path) -> Network:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        raise SchemaError(f"{path} is not a version-{VERSION} model file")
    desc, values = None, {}
    for line in lines[1:]:
        tag, _, rest = line.partition(" ")
        if tag == "arch":
            desc = json.loads(rest)
        elif tag == "param":
            name, shape, *vals = rest.split(" ")
            dims = tuple(int(d) for d in shape.split(",")) if shape else ()
            values[name] = np.array([float(v) for v in vals]).reshape(dims)
    if desc is None:
        raise SchemaError(f"{path} has no architecture record")
    net = Network(desc)
    params = net.params()
    if set(params) != set(values):
        raise SchemaError(f"parameter names differ: {sorted(set(params) ^ set(values))}")
    for k, arr in params.items():
        if arr.shape != values[k].shape:
            raise SchemaError(f"shape mismatch for {k}")
        arr[...] = values[k]
    return net


def neutralizer_tables(net: Network, epsilon: float = 1e-8) -> dict[str, NeutralizerMatrix]:
    return {name: export_neutralizers(lay, epsilon)
            for name, lay in net.layers().items() if lay.kind == "nan_dense"}


def write_neutralizers(path, tables: dict[str, NeutralizerMatrix]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "neuron", "feature", "value"])
        for name, U in tables.items():
            for k, j, v in U.csv_rows():
                w.writerow([name, k, j, repr(v)])
