"""Baseline imputers: constant, mean, k-nearest-neighbour and chained linear regressions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import MaskedMatrix
from .errors import FitError, ImputeError, NotFittedError, ShapeError

KINDS = ("constant", "mean", "knn", "iterative")


@dataclass(frozen=True)
class Imputer:
    """An imputer configuration plus (after fitting) its frozen state.

    ``state`` holds ``means`` (mean, knn, iterative), ``train`` (knn) and
    ``steps`` for iterative: the ordered list of ``(column, coef, intercept)``
    regressions learned over all cycles, replayed on new data.
    """

    kind: str
    params: dict = field(default_factory=dict)
    state: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown imputer kind {self.kind!r}")

    @property
    def fitted(self) -> bool:
        return self.state is not None

    @property
    def width(self) -> int:
        if not self.fitted:
            raise NotFittedError("imputer not fitted")
        return self.state["width"]


def parse_imputer(text: str) -> Imputer:
    """Build an unfitted imputer from ``zero``, ``constant:c``, ``mean``, ``knn:k`` or
    ``iterative:cycles:tol``."""
    name, *args = text.strip().lower().split(":")
    if name == "zero":
        return Imputer("constant", {"value": 0.0})
    if name == "constant":
        return Imputer("constant", {"value": float(args[0]) if args else 0.0})
    if name == "mean":
        return Imputer("mean")
    if name == "knn":
        return Imputer("knn", {"k": int(args[0]) if args else 5})
    if name == "iterative":
        return Imputer("iterative", {"max_cycles": int(args[0]) if args else 10,
                                     "tol": float(args[1]) if len(args) > 1 else 1e-3})
    raise ValueError(f"unknown imputer {text!r}")


def _observed_means(X: MaskedMatrix) -> np.ndarray:
    counts = (~X.mask).sum(axis=0)
    if np.any(counts == 0):
        raise FitError(f"columns {np.flatnonzero(counts == 0).tolist()} have no observed cells")
    return X.filled().sum(axis=0) / counts


RIDGE = 1e-6


def _fit_column(Z: np.ndarray, j: int, rows: np.ndarray):
    others = np.delete(np.arange(Z.shape[1]), j)
    A = np.column_stack([Z[rows][:, others], np.ones(len(rows))])
    target = Z[rows, j]
    gram = A.T @ A + RIDGE * np.eye(A.shape[1])
    w = np.linalg.solve(gram, A.T @ target)
    return w[:-1], w[-1]


def _predict_column(Z: np.ndarray, j: int, coef: np.ndarray, intercept: float, rows):
    others = np.delete(np.arange(Z.shape[1]), j)
    return Z[rows][:, others] @ coef + intercept


def _iterate(X: MaskedMatrix, means: np.ndarray, max_cycles: int, tol: float):
    Z = X.filled()
    miss = X.mask
    Z[miss] = np.broadcast_to(means, Z.shape)[miss]
    counts = miss.sum(axis=0)
    order = [j for j in np.argsort(counts, kind="stable") if counts[j] > 0]
    steps, cycles, converged = [], 0, True
    if not order or X.p < 2:
        return Z, steps, cycles, converged
    converged = False
    for cycles in range(1, max_cycles + 1):
        change = 0.0
        for j in order:
            rows = np.flatnonzero(~miss[:, j])
            coef, intercept = _fit_column(Z, j, rows)
            steps.append((int(j), coef, float(intercept)))
            gaps = np.flatnonzero(miss[:, j])
            new = _predict_column(Z, j, coef, intercept, gaps)
            change = max(change, float(np.max(np.abs(new - Z[gaps, j]))))
            Z[gaps, j] = new
        if change < tol:
            converged = True
            break
    return Z, steps, cycles, converged


def fit_imputer(kind, train: MaskedMatrix) -> Imputer:
    """Fit ``kind`` (an :class:`Imputer` or a string accepted by :func:`parse_imputer`)."""
    imp = parse_imputer(kind) if isinstance(kind, str) else kind
    state: dict = {"width": train.p}
    if imp.kind == "constant":
        pass
    elif imp.kind == "mean":
        state["means"] = _observed_means(train)
    elif imp.kind == "knn":
        if train.n == 0:
            raise FitError("empty training matrix")
        state["train"] = train
    else:
        means = _observed_means(train)
        _, steps, cycles, converged = _iterate(train, means, imp.params["max_cycles"], imp.params["tol"])
        state.update(means=means, steps=steps, cycles=cycles, converged=converged)
    return Imputer(imp.kind, dict(imp.params), state)


def nan_euclidean(row: np.ndarray, row_mask: np.ndarray, ref: np.ndarray, ref_mask: np.ndarray):
    """Distances from one row to every reference row over co-observed features,
    scaled by ``p / co_observed``; ``inf`` where nothing is co-observed."""
    both = ~row_mask & ~ref_mask
    diff = np.where(both, ref - np.where(row_mask, 0.0, row), 0.0)
    co = both.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = np.where(co > 0, (diff * diff).sum(axis=1) * (row.shape[0] / co), np.inf)
    return np.sqrt(d2)


def _knn_fill(imp: Imputer, X: MaskedMatrix) -> np.ndarray:
    k = imp.params["k"]
    T: MaskedMatrix = imp.state["train"]
    Tv, Tm = T.filled(), T.mask
    out = X.filled()
    for i in np.flatnonzero(X.mask.any(axis=1)):
        dist = nan_euclidean(X.values[i], X.mask[i], Tv, Tm)
        for j in np.flatnonzero(X.mask[i]):
            donors = np.flatnonzero(~Tm[:, j] & np.isfinite(dist))
            if donors.size == 0:
                raise ImputeError(f"row {i}: no neighbour shares an observed feature and has column {j}")
            nearest = donors[np.argsort(dist[donors], kind="stable")[:k]]
            out[i, j] = Tv[nearest, j].mean()
    return out


def apply_imputer(imp: Imputer, X: MaskedMatrix) -> np.ndarray:
    """Return a fully observed copy of ``X``; observed cells are left untouched."""
    if not imp.fitted:
        raise NotFittedError("apply_imputer called before fit_imputer")
    if X.p != imp.width:
        raise ShapeError(f"imputer fitted on {imp.width} columns, got {X.p}")
    if not X.has_missing:
        return np.array(X.values)
    if imp.kind == "constant":
        return X.filled(imp.params["value"])
    if imp.kind == "mean":
        return np.where(X.mask, imp.state["means"], X.values)
    if imp.kind == "knn":
        return _knn_fill(imp, X)
    Z = np.where(X.mask, imp.state["means"], X.values)
    for j, coef, intercept in imp.state["steps"]:
        gaps = np.flatnonzero(X.mask[:, j])
        if gaps.size:
            Z[gaps, j] = _predict_column(Z, j, coef, intercept, gaps)
    return Z
