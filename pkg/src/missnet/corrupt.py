"""Missingness simulators (MCAR / MAR / MNAR), MI feature ranking and modality augmentation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix, ModalDataset, rng_for
from .errors import AugmentError, RankError, SpecError, TooFewRowsError

MECHANISMS = ("mcar", "mar", "mnar")


@dataclass(frozen=True)
class MissingSpec:
    """What to remove.

    ``target_feature`` is the column that loses values. For MAR the rows are
    chosen from a percentile window of ``cond_feature``; for MNAR from a
    window of the target column itself; for MCAR uniformly at random.
    """

    mechanism: str
    fraction: float
    target_feature: int = 0
    cond_feature: int | None = None
    seed: int = 0

    def __post_init__(self):
        mech = self.mechanism.lower()
        if mech not in MECHANISMS:
            raise SpecError(f"unknown mechanism {self.mechanism!r}")
        object.__setattr__(self, "mechanism", mech)
        if not 0.0 <= self.fraction <= 1.0:
            raise SpecError(f"fraction must lie in [0, 1], got {self.fraction}")
        if mech == "mar":
            if self.cond_feature is None:
                raise SpecError("MAR needs a conditioning feature")
            if self.cond_feature == self.target_feature:
                raise SpecError("MAR conditioning feature must differ from the target feature")


@dataclass(frozen=True)
class CorruptionReport:
    mechanism: str
    fraction: float
    target_feature: int
    rows_masked: np.ndarray
    percentile_window: tuple[float, float] | None = None
    value_window: tuple[float, float] | None = None
    cond_feature: int | None = None

    CSV_HEADER = ("mechanism", "feature", "cond_feature", "l", "f", "rows_masked")

    def csv_row(self) -> list:
        lower = "" if self.percentile_window is None else repr(self.percentile_window[0])
        cond = "" if self.cond_feature is None else self.cond_feature
        return [self.mechanism, self.target_feature, cond, lower, repr(self.fraction),
                len(self.rows_masked)]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def percentile_midpoint(values: np.ndarray, q: float) -> float:
    return float(np.percentile(values, q, method="midpoint"))


def window_rows(column: np.ndarray, observed: np.ndarray, window: tuple[float, float]):
    """Rows whose observed value lies in the percentile window (bounds inclusive)."""
    obs = column[observed]
    lo, hi = percentile_midpoint(obs, window[0]), percentile_midpoint(obs, window[1])
    inside = observed & (column >= lo) & (column <= hi)
    return np.flatnonzero(inside), (lo, hi)


def corrupt(X: MaskedMatrix, spec: MissingSpec) -> tuple[MaskedMatrix, CorruptionReport]:
    """Mask values of ``spec.target_feature`` according to the mechanism."""
    n, f, j = X.n, spec.fraction, spec.target_feature
    if not 0 <= j < X.p:
        raise SpecError(f"target feature {j} out of range for {X.p} columns")
    if X.mask[:, j].any():
        raise SpecError(f"target feature {j} already has missing cells")
    if f == 0:
        return X, CorruptionReport(spec.mechanism, f, j, np.array([], dtype=int),
                                   cond_feature=spec.cond_feature)
    if f * n < 1:
        raise TooFewRowsError(f"fraction {f} of {n} rows masks nothing")
    rng = rng_for(spec.seed, "corrupt")

    window = value_window = None
    if spec.mechanism == "mcar":
        rows = np.sort(rng.choice(n, size=round_half_up(f * n), replace=False))
    else:
        source = spec.cond_feature if spec.mechanism == "mar" else j
        if not 0 <= source < X.p:
            raise SpecError(f"conditioning feature {source} out of range")
        lower = float(rng.uniform(0.0, 100.0 - 100.0 * f))
        window = (lower, min(lower + 100.0 * f, 100.0))
        rows, value_window = window_rows(X.values[:, source], ~X.mask[:, source], window)

    mask = np.array(X.mask)
    mask[rows, j] = True
    report = CorruptionReport(spec.mechanism, f, j, rows, window, value_window, spec.cond_feature)
    return X.replace(mask=mask), report


def mcar_features(X: MaskedMatrix, fraction: float, features, seed: int) -> MaskedMatrix:
    """Independent MCAR at the same row fraction on each listed feature."""
    out = X
    for k, j in enumerate(features):
        out, _ = corrupt(out, MissingSpec("mcar", fraction, int(j), seed=seed * 1000 + k))
    return out


# --------------------------------------------------------------------------
# mutual information ranking
# --------------------------------------------------------------------------

def discretize(x: np.ndarray, bins: int = 10) -> np.ndarray:
    """Integer codes: values as-is if at most ``bins`` distinct, else equal-frequency bins."""
    uniq, codes = np.unique(x, return_inverse=True)
    if len(uniq) <= bins:
        return codes
    edges = np.quantile(x, np.arange(1, bins) / bins)
    return np.searchsorted(edges, x, side="right")


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in mutual information (nats) between two code vectors."""
    _, a = np.unique(a, return_inverse=True)
    _, b = np.unique(b, return_inverse=True)
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= joint.sum()
    pa, pb = joint.sum(axis=1, keepdims=True), joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def rank_features_mi(X: MaskedMatrix, y, bins: int = 10, cols=None) -> list[tuple[int, float]]:
    """Columns sorted by descending MI with ``y``; ties go to the lower index."""
    cols = list(range(X.p)) if cols is None else [int(c) for c in cols]
    if not cols:
        raise RankError("no columns to rank")
    if bins < 2:
        raise RankError("need at least 2 bins")
    yc = discretize(np.asarray(y, dtype=float), bins)
    scores = []
    for c in cols:
        if X.mask[:, c].any():
            raise RankError(f"column {c} has missing cells")
        scores.append((c, mutual_information(discretize(X.values[:, c], bins), yc)))
    return sorted(scores, key=lambda t: (-t[1], t[0]))


# --------------------------------------------------------------------------
# modality augmentation
# --------------------------------------------------------------------------

def augmented_size(M: int, n: int, max_removed: int) -> int:
    return sum(math.comb(M, m) for m in range(max_removed + 1)) * n


def augment_modalities(md: ModalDataset, max_removed: int, seed: int = 0,
                       shuffle: bool = False) -> ModalDataset:
    """Append copies of all rows with every subset of up to ``max_removed`` modalities masked.

    Blocks are ordered by subset size, then lexicographically by modality
    position. ``shuffle`` permutes the final rows with the ``augment`` stream.
    """
    if not 0 <= max_removed < md.M:
        raise AugmentError(f"max_removed must lie in [0, {md.M - 1}], got {max_removed}")
    names = md.names
    parts = [md.mask_modalities([names[i] for i in subset])
             for m in range(max_removed + 1)
             for subset in itertools.combinations(range(md.M), m)]
    out = ModalDataset.concat_rows(parts) if len(parts) > 1 else md
    if shuffle:
        out = out.take(rng_for(seed, "augment").permutation(out.n))
    return out
