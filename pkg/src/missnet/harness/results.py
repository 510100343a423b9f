"""Tidy result tables, trajectories and plot-ready curves, all stored as CSV."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SchemaError

RESULT_COLUMNS = ("experiment", "dataset", "mechanism", "fraction", "method",
                  "repetition", "fold", "metric", "value", "seed")
RESULT_VERSION = "missnet-results 1"
CURVE_COLUMNS = ("curve", "x", "y", "y_std")
TRAJECTORY_COLUMNS = ("method", "repetition", "row", "step", "removed", "prob")


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    dataset: str
    mechanism: str
    fraction: float
    method: str
    repetition: int
    fold: int
    metric: str
    value: float
    seed: int


@dataclass
class ResultTable:
    """Append-only list of :class:`ResultRow`, one per design cell and metric.

    Per-epoch metrics carry the epoch after an ``@`` in the metric name
    (``auc_clean@17``); ``fold`` is -1 for rows that do not belong to a fold.
    """
    rows: list[ResultRow] = field(default_factory=list)

    def add(self, **kw) -> None:
        kw.setdefault("fold", -1)
        kw["fraction"] = float(kw["fraction"])
        kw["value"] = float(kw["value"])
        self.rows.append(ResultRow(**kw))

    def extend(self, other: "ResultTable") -> None:
        self.rows.extend(other.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def select(self, **kw) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in kw.items())]

    def values(self, **kw) -> np.ndarray:
        return np.array([r.value for r in self.select(**kw)])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "ResultTable":
        text = str(path_or_text)
        if "\n" not in text:
            text = Path(text).read_text(encoding="utf-8")
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader, ()))
        if header != RESULT_COLUMNS:
            raise SchemaError(f"unexpected result header {header}")
        out = cls()
        for rec in reader:
            d = dict(zip(RESULT_COLUMNS, rec))
            out.rows.append(ResultRow(
                d["experiment"], d["dataset"], d["mechanism"], float(d["fraction"]),
                d["method"], int(d["repetition"]), int(d["fold"]), d["metric"],
                float(d["value"]), int(d["seed"])))
        return out


def split_metric(metric: str) -> tuple[str, int | None]:
    """``"auc_clean@17"`` -> ``("auc_clean", 17)``; plain names give ``None``."""
    name, _, epoch = metric.partition("@")
    return name, (int(epoch) if epoch else None)


@dataclass(frozen=True)
class Curve:
    curve: str
    x: np.ndarray
    y: np.ndarray
    y_std: np.ndarray


def learning_curves(table: ResultTable) -> list[Curve]:
    """Mean and population std over repetitions of every per-epoch metric.

    Curve ids are ``dataset/mechanism/fraction/method/metric``.
    """
    acc: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in table.rows:
        name, epoch = split_metric(r.metric)
        if epoch is None:
            continue
        cid = f"{r.dataset}/{r.mechanism}/{r.fraction!r}/{r.method}/{name}"
        acc[cid][epoch].append(r.value)
    curves = []
    for cid, by_epoch in acc.items():
        xs = np.array(sorted(by_epoch))
        ys = [np.asarray(by_epoch[x]) for x in xs]
        curves.append(Curve(cid, xs, np.array([y.mean() for y in ys]),
                            np.array([y.std() for y in ys])))
    return curves


def write_curves(path, curves: list[Curve]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for c in curves:
            for x, y, s in zip(c.x, c.y, c.y_std):
                w.writerow([c.curve, _fmt(x.item()), repr(float(y)), repr(float(s))])


@dataclass(frozen=True)
class Trajectory:
    """Predicted probabilities for one test row as modalities are removed.

    ``probs[k]`` is the prediction after removing the first ``k`` entries of
    ``order``; ``probs[0]`` is the intact row and ``probs[M]`` the empty one
    (NaN when the method cannot predict without any observed modality).
    """
    method: str
    repetition: int
    row: int
    order: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        if len(self.probs) != len(self.order) + 1:
            raise ValueError("trajectory needs len(order) + 1 probabilities")
        p = self.probs[np.isfinite(self.probs)]
        if ((p < 0) | (p > 1)).any():
            raise ValueError("probabilities must lie in [0, 1]")


def write_trajectories(path, trajectories: list[Trajectory]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for t in trajectories:
            for step, prob in enumerate(t.probs):
                removed = t.order[step - 1] if step else ""
                w.writerow([t.method, t.repetition, t.row, step, removed, repr(float(prob))])


def read_trajectories(path) -> list[Trajectory]:
    groups: dict[tuple, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader, ())) != TRAJECTORY_COLUMNS:
            raise SchemaError("unexpected trajectory header")
        for method, rep, row, step, removed, prob in reader:
            groups.setdefault((method, int(rep), int(row)), []).append((int(step), removed, float(prob)))
    out = []
    for (method, rep, row), recs in groups.items():
        recs.sort()
        out.append(Trajectory(method, rep, row, tuple(r[1] for r in recs[1:]),
                              np.array([r[2] for r in recs])))
    return out
