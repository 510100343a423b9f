"""Counterfactual attributions: how much the prediction moves when a unit is masked."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..data import MaskedMatrix, ModalDataset
from ..errors import ShapeError, StateError
from ..nn import Network


@dataclass(frozen=True)
class Attribution:
    unit: str
    delta: float        # base prediction minus prediction with the unit masked
    base: float
    masked: float
    skipped: bool = False   # the unit was already fully missing


def _as_inputs(net: Network, row) -> dict[str, MaskedMatrix]:
    if isinstance(row, ModalDataset):
        row = row.as_inputs()
    if isinstance(row, MaskedMatrix):
        row = {net.input_names[0]: row}
    out = {}
    for name in net.input_names:
        if name not in row:
            raise ShapeError(f"row has no input {name!r}")
        m = row[name]
        if not isinstance(m, MaskedMatrix):
            m = MaskedMatrix.from_nan(m)
        if m.n != 1:
            raise ShapeError(f"explain takes one row, input {name!r} has {m.n}")
        out[name] = m
    return out


def _units(inputs: dict[str, MaskedMatrix], unit: str, feature_names=None):
    """``(label, input, columns)`` per unit, in input then column order."""
    if unit == "modality":
        return [(name, name, np.arange(m.p)) for name, m in inputs.items()]
    if unit != "feature":
        raise ValueError(f"unit must be 'modality' or 'feature', got {unit!r}")
    units = []
    single = len(inputs) == 1
    for name, m in inputs.items():
        for j in range(m.p):
            label = (feature_names[len(units)] if feature_names
                     else str(j) if single else f"{name}.{j}")
            units.append((label, name, np.array([j])))
    return units


def counterfactual_interpret(net: Network, row, unit: str = "modality",
                             feature_names=None) -> list[Attribution]:
    """Mask each modality (or feature) in turn and report the change in prediction.

    Attributions are sorted by ``|delta|`` (largest first, ties in unit
    order). They are not additive: masking several units together can
    differ from the sum of the single-unit deltas. Units that are already
    fully missing get ``delta = 0`` and ``skipped = True``.
    """
    if not any(lay.kind == "nan_dense" for lay in net.layers().values()):
        raise StateError("counterfactual masking needs a network whose input layers accept masks")
    inputs = _as_inputs(net, row)
    base = float(net.predict_score(inputs)[0])
    out = []
    for label, name, cols in _units(inputs, unit, feature_names):
        m = inputs[name]
        if m.mask[0, cols].all():
            out.append(Attribution(label, 0.0, base, base, True))
            continue
        extra = np.zeros(m.shape, dtype=bool)
        extra[0, cols] = True
        masked = float(net.predict_score({**inputs, name: m.with_missing(extra)})[0])
        out.append(Attribution(label, base - masked, base, masked))
    order = sorted(range(len(out)), key=lambda i: -abs(out[i].delta))
    return [out[i] for i in order]


ATTRIBUTION_COLUMNS = ("unit", "delta", "base", "masked", "skipped")


def write_attributions(path, attributions: list[Attribution]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATTRIBUTION_COLUMNS)
        for a in attributions:
            w.writerow([a.unit, repr(a.delta), repr(a.base), repr(a.masked), int(a.skipped)])
