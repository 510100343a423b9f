"""Masked data model, CSV ingestion, encoding, splitting and synthetic generators.

Missing cells are represented by an explicit boolean mask next to the value
array (``True`` = missing). The value stored under a missing cell is never
read by any computation in this package.

Random streams
--------------
Every stochastic operation draws from its own stream,
``np.random.default_rng(np.random.SeedSequence([seed, STREAM]))``, where
``STREAM`` is a fixed per-operation constant (see ``STREAMS``). Two operations
given the same seed therefore never share random numbers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyColumnError,
    MissingValueError,
    ParseError,
    RebalanceError,
    SchemaError,
    ShapeError,
    SplitError,
    TargetMissingError,
    UnknownCategoryError,
)

STREAMS = {
    "split_kfold": 11,
    "rebalance": 12,
    "simulate_xor": 13,
    "simulate_multimodal": 14,
    "corrupt": 21,
    "augment": 22,
    "init": 31,
    "shuffle": 32,
    "dropout": 33,
    "removal_order": 41,
}

MISSING_TOKENS = {"", "nan"}


def rng_for(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[stream]]))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    """An ``n x p`` float matrix with a same-shaped missingness mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise ShapeError(f"values {values.shape} and mask {mask.shape} must be equal 2-D shapes")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @classmethod
    def from_nan(cls, array) -> "MaskedMatrix":
        a = np.atleast_2d(np.asarray(array, dtype=np.float64))
        return cls(a, np.isnan(a))

    @classmethod
    def complete(cls, array) -> "MaskedMatrix":
        a = np.atleast_2d(np.asarray(array, dtype=np.float64))
        return cls(a, np.zeros(a.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def observed_count(self) -> np.ndarray:
        """q_i for every row."""
        return self.p - self.mask.sum(axis=1)

    @property
    def missing_count(self) -> np.ndarray:
        """r_i for every row."""
        return self.mask.sum(axis=1)

    @property
    def has_missing(self) -> bool:
        return bool(self.mask.any())

    def observed(self, i: int, j: int) -> float:
        if self.mask[i, j]:
            raise MissingValueError(f"cell ({i}, {j}) is missing")
        return float(self.values[i, j])

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.mask, fill, self.values)

    def to_nan(self) -> np.ndarray:
        return self.filled(np.nan)

    def take(self, rows) -> "MaskedMatrix":
        rows = np.asarray(rows)
        return MaskedMatrix(self.values[rows], self.mask[rows])

    def columns(self, cols) -> "MaskedMatrix":
        cols = np.asarray(cols)
        return MaskedMatrix(self.values[:, cols], self.mask[:, cols])

    def with_missing(self, extra: np.ndarray) -> "MaskedMatrix":
        """Return a copy with ``extra`` cells additionally flagged missing."""
        return MaskedMatrix(self.values, self.mask | np.asarray(extra, dtype=bool))

    def replace(self, values=None, mask=None) -> "MaskedMatrix":
        return MaskedMatrix(self.values if values is None else values,
                            self.mask if mask is None else mask)

    @staticmethod
    def hstack(parts: Sequence["MaskedMatrix"]) -> "MaskedMatrix":
        return MaskedMatrix(np.hstack([m.values for m in parts]), np.hstack([m.mask for m in parts]))

    @staticmethod
    def vstack(parts: Sequence["MaskedMatrix"]) -> "MaskedMatrix":
        return MaskedMatrix(np.vstack([m.values for m in parts]), np.vstack([m.mask for m in parts]))

    def equals(self, other: "MaskedMatrix") -> bool:
        """Equality on masks and observed payloads only."""
        return (self.shape == other.shape and np.array_equal(self.mask, other.mask)
                and np.array_equal(self.filled(), other.filled()))


# --------------------------------------------------------------------------
# schema / datasets
# --------------------------------------------------------------------------

KINDS = ("continuous", "binary", "categorical")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = "continuous"
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    target: str
    task: str = "classification"

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]


def parse_schema(text: str) -> Schema:
    """Parse the key=value schema format.

    Reserved keys are ``target`` and ``task``; every other key names a
    feature column whose value is ``continuous``, ``binary``,
    ``categorical`` or ``categorical:a,b,c``. Column order follows the file.
    """
    target, task, cols = None, "classification", []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "target":
            target = value
        elif key == "task":
            task = value
        else:
            kind, _, cats = value.partition(":")
            categories = tuple(c.strip() for c in cats.split(",") if c.strip()) if cats else ()
            cols.append(Column(key, kind.strip(), categories))
    if target is None:
        raise SchemaError("schema has no target")
    if task not in ("classification", "regression"):
        raise SchemaError(f"unknown task {task!r}")
    return Schema(tuple(cols), target, task)


def load_schema(path) -> Schema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


def format_schema(schema: Schema) -> str:
    lines = [f"target={schema.target}", f"task={schema.task}"]
    for c in schema.columns:
        v = c.kind + (":" + ",".join(c.categories) if c.categories else "")
        lines.append(f"{c.name}={v}")
    return "\n".join(lines) + "\n"


def infer_schema(path, target: str | None = None, task: str = "classification") -> Schema:
    """All-continuous schema from a CSV header; target defaults to ``y`` or the last column."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    if target is None:
        target = "y" if "y" in header else header[-1]
    if target not in header:
        raise SchemaError(f"target {target!r} not in header")
    return Schema(tuple(Column(h) for h in header if h != target), target, task)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: MaskedMatrix
    target: np.ndarray
    columns: tuple[Column, ...]
    name: str = ""
    task: str = "classification"

    def __post_init__(self):
        target = _frozen(np.asarray(self.target, dtype=np.float64))
        if target.shape != (self.features.n,):
            raise ShapeError("target length must equal the feature row count")
        if len(self.columns) != self.features.p:
            raise ShapeError("one column description per feature column required")
        for c in self.columns:
            if c.kind == "categorical" and len(c.categories) < 2:
                raise SchemaError(f"categorical column {c.name!r} needs at least 2 categories")
        object.__setattr__(self, "target", target)

    @property
    def n(self) -> int:
        return self.features.n

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features.take(rows), self.target[rows], self.columns, self.name, self.task)


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def load_csv(path, schema: Schema | None = None) -> Dataset:
    """Read a CSV file into a :class:`Dataset`.

    Empty fields and ``NaN`` (any case) are missing. Categorical cells are
    stored as integer codes into the column's category list; lists not fixed
    by the schema are built in first-seen order.
    """
    path = Path(path)
    if schema is None:
        schema = infer_schema(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = [r for r in reader if r]

    expected = set(schema.names) | {schema.target}
    if len(header) != len(set(header)) or set(header) != expected:
        raise SchemaError(f"header {header} does not match schema columns {sorted(expected)}")
    pos = {h: i for i, h in enumerate(header)}
    n, p = len(rows), len(schema.columns)
    values = np.zeros((n, p))
    mask = np.zeros((n, p), dtype=bool)
    target = np.zeros(n)
    categories = {c.name: list(c.categories) for c in schema.columns if c.kind == "categorical"}
    fixed = {c.name for c in schema.columns if c.kind == "categorical" and c.categories}

    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"row {i} has {len(row)} fields, header has {len(header)}")
        tok = row[pos[schema.target]]
        if _is_missing(tok):
            raise TargetMissingError(f"target missing at row {i}")
        try:
            target[i] = float(tok)
        except ValueError:
            raise ParseError(i, pos[schema.target], tok) from None
        for j, col in enumerate(schema.columns):
            tok = row[pos[col.name]].strip()
            if _is_missing(tok):
                mask[i, j] = True
                continue
            if col.kind == "categorical":
                cats = categories[col.name]
                if tok not in cats:
                    if col.name in fixed:
                        raise UnknownCategoryError(f"{tok!r} not a category of {col.name!r} (row {i})")
                    cats.append(tok)
                values[i, j] = cats.index(tok)
                continue
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(i, pos[col.name], tok) from None
            if col.kind == "binary" and v not in (0.0, 1.0):
                raise ParseError(i, pos[col.name], tok)
            values[i, j] = v

    columns = tuple(Column(c.name, c.kind, tuple(categories[c.name])) if c.kind == "categorical" else c
                    for c in schema.columns)
    return Dataset(MaskedMatrix(values, mask), target, columns, path.stem, schema.task)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path, ds: Dataset, target: str = "y") -> None:
    """Write a dataset in the format :func:`load_csv` reads (missing = empty field)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in ds.columns] + [target])
        for i in range(ds.n):
            row = []
            for j, c in enumerate(ds.columns):
                if ds.features.mask[i, j]:
                    row.append("")
                elif c.kind == "categorical":
                    row.append(c.categories[int(ds.features.values[i, j])])
                else:
                    row.append(_fmt(ds.features.values[i, j]))
            w.writerow(row + [_fmt(ds.target[i])])


def schema_of(ds: Dataset, target: str = "y") -> Schema:
    return Schema(ds.columns, target, ds.task)


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EncodedBlock:
    source: int
    start: int
    stop: int
    kind: str
    categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class EncodingMap:
    blocks: tuple[EncodedBlock, ...]
    width: int

    @property
    def continuous_columns(self) -> list[int]:
        return [b.start for b in self.blocks if b.kind == "continuous"]

    @property
    def has_categorical(self) -> bool:
        return any(b.kind == "categorical" for b in self.blocks)


def encode(ds: Dataset) -> tuple[MaskedMatrix, EncodingMap]:
    """0/1 and one-hot encoding; a missing categorical cell masks its whole block."""
    blocks, parts_v, parts_m, start = [], [], [], 0
    X = ds.features
    for j, col in enumerate(ds.columns):
        v, m = X.values[:, j], X.mask[:, j]
        if col.kind == "categorical":
            k = len(col.categories)
            codes = np.where(m, 0, v)
            if np.any((codes != np.round(codes)) | (codes < 0) | (codes >= k)):
                raise UnknownCategoryError(f"column {col.name!r} holds a code outside its {k} categories")
            onehot = np.zeros((X.n, k))
            onehot[np.arange(X.n), codes.astype(int)] = 1.0
            parts_v.append(onehot)
            parts_m.append(np.repeat(m[:, None], k, axis=1))
            blocks.append(EncodedBlock(j, start, start + k, "categorical", col.categories))
            start += k
        else:
            parts_v.append(v[:, None])
            parts_m.append(m[:, None])
            blocks.append(EncodedBlock(j, start, start + 1, col.kind))
            start += 1
    if not parts_v:
        return MaskedMatrix(np.zeros((X.n, 0)), np.zeros((X.n, 0), bool)), EncodingMap((), 0)
    return MaskedMatrix(np.hstack(parts_v), np.hstack(parts_m)), EncodingMap(tuple(blocks), start)


def decode(X: MaskedMatrix, emap: EncodingMap) -> MaskedMatrix:
    """Inverse of :func:`encode`: category blocks collapse back to codes (argmax)."""
    values = np.zeros((X.n, len(emap.blocks)))
    mask = np.zeros((X.n, len(emap.blocks)), dtype=bool)
    for b in emap.blocks:
        block = X.values[:, b.start:b.stop]
        mask[:, b.source] = X.mask[:, b.start:b.stop].any(axis=1)
        values[:, b.source] = block.argmax(axis=1) if b.kind == "categorical" else block[:, 0]
    return MaskedMatrix(values, mask)


# --------------------------------------------------------------------------
# standardization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardizerStats:
    columns: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def transform(self, X: MaskedMatrix) -> MaskedMatrix:
        values = np.array(X.values)
        cols = list(self.columns)
        if cols:
            values[:, cols] = (values[:, cols] - self.mean) / self.std
        return MaskedMatrix(values, X.mask)


def standardize(train: MaskedMatrix, others: Sequence[MaskedMatrix] = (), cols=None):
    """Fit mean / population std on observed train cells, apply to all matrices.

    Returns ``([train', *others'], stats)``. Constant columns keep std = 1
    and are flagged in ``stats.constant``.
    """
    cols = tuple(range(train.p)) if cols is None else tuple(int(c) for c in cols)
    mean, std, const = np.zeros(len(cols)), np.ones(len(cols)), np.zeros(len(cols), bool)
    for k, c in enumerate(cols):
        obs = train.values[~train.mask[:, c], c]
        if obs.size == 0:
            raise EmptyColumnError(f"column {c} has no observed training cells")
        mean[k] = obs.mean()
        s = obs.std()
        if s > 0:
            std[k] = s
        else:
            const[k] = True
    stats = StandardizerStats(cols, mean, std, const)
    return [stats.transform(m) for m in (train, *others)], stats


# --------------------------------------------------------------------------
# splitting / rebalancing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def split_kfold(n: int, k: int, seed: int) -> FoldPlan:
    if k < 2 or k > n:
        raise SplitError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = rng_for(seed, "split_kfold").permutation(n)
    tests = [np.sort(f) for f in np.array_split(perm, k)]
    folds = []
    for i, test in enumerate(tests):
        train = np.sort(np.concatenate([t for j, t in enumerate(tests) if j != i]))
        folds.append((train, test))
    return FoldPlan(tuple(folds), seed)


def rebalance(labels, indices, seed: int) -> np.ndarray:
    """Oversample the minority class (with replacement) up to the majority count.

    Every input index appears at least once; the result is shuffled.
    """
    labels = np.asarray(labels)
    indices = np.asarray(indices)
    y = labels[indices]
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise RebalanceError("rebalance needs both classes present")
    rng = rng_for(seed, "rebalance")
    major = counts.max()
    extra = []
    for c, cnt in zip(classes, counts):
        if cnt < major:
            extra.append(rng.choice(indices[y == c], size=major - cnt, replace=True))
    out = np.concatenate([indices, *extra])
    return out[rng.permutation(len(out))]


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

# ordered so consecutive clusters alternate labels
XOR_CENTERS = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
XOR_LABELS = np.array([0.0, 1.0, 0.0, 1.0])


def simulate_xor(n: int = 1000, noise_var: float = 0.25, seed: int = 0) -> Dataset:
    """Four Gaussian clusters at (+-1, +-1); label 1 iff the center's signs differ."""
    if n < 4 or noise_var < 0:
        raise ValueError("need n >= 4 and noise_var >= 0")
    rng = rng_for(seed, "simulate_xor")
    cluster = rng.permutation(np.arange(n) % 4)
    X = XOR_CENTERS[cluster] + rng.normal(0.0, math.sqrt(noise_var), size=(n, 2))
    return Dataset(MaskedMatrix.complete(X), XOR_LABELS[cluster],
                   (Column("x0"), Column("x1")), "xor")


@dataclass(frozen=True, eq=False)
class ModalDataset:
    """Modalities sharing rows, plus a 0/1 target."""

    modalities: tuple[tuple[str, MaskedMatrix], ...]
    target: np.ndarray

    def __post_init__(self):
        mods = tuple((str(k), v) for k, v in self.modalities)
        names = [k for k, _ in mods]
        if len(set(names)) != len(names):
            raise SchemaError("modality names must be unique")
        if len({v.n for _, v in mods}) > 1:
            raise ShapeError("all modalities need the same row count")
        target = _frozen(np.asarray(self.target, dtype=np.float64))
        if mods and target.shape != (mods[0][1].n,):
            raise ShapeError("target length must equal the row count")
        object.__setattr__(self, "modalities", mods)
        object.__setattr__(self, "target", target)

    @property
    def M(self) -> int:
        return len(self.modalities)

    @property
    def n(self) -> int:
        return self.modalities[0][1].n

    @property
    def names(self) -> list[str]:
        return [k for k, _ in self.modalities]

    @property
    def sizes(self) -> list[int]:
        return [v.p for _, v in self.modalities]

    def __getitem__(self, name: str) -> MaskedMatrix:
        return dict(self.modalities)[name]

    def as_inputs(self) -> dict[str, MaskedMatrix]:
        return dict(self.modalities)

    def take(self, rows) -> "ModalDataset":
        rows = np.asarray(rows)
        return ModalDataset(tuple((k, v.take(rows)) for k, v in self.modalities), self.target[rows])

    def combined(self) -> MaskedMatrix:
        return MaskedMatrix.hstack([v for _, v in self.modalities])

    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for k, v in self.modalities:
            out[k] = slice(start, start + v.p)
            start += v.p
        return out

    def with_combined(self, X: MaskedMatrix) -> "ModalDataset":
        """Same layout, values taken from a combined matrix."""
        return ModalDataset(tuple((k, X.columns(np.arange(s.start, s.stop)))
                                  for k, s in self.slices().items()), self.target)

    def mask_modalities(self, names) -> "ModalDataset":
        names = set(names)
        mods = tuple((k, v.with_missing(np.ones(v.shape, bool)) if k in names else v)
                     for k, v in self.modalities)
        return ModalDataset(mods, self.target)

    @staticmethod
    def concat_rows(parts: Sequence["ModalDataset"]) -> "ModalDataset":
        names = parts[0].names
        mods = tuple((k, MaskedMatrix.vstack([p[k] for p in parts])) for k in names)
        return ModalDataset(mods, np.concatenate([p.target for p in parts]))


def simulate_multimodal(sizes: Sequence[int], n: int, separation=1.0, seed: int = 0, *,
                        names: Sequence[str] | None = None, positive_rate: float = 0.5,
                        cell_missing_rate: float = 0.0,
                        modality_missing_rate: float = 0.0) -> ModalDataset:
    """Class-conditional Gaussian modalities.

    Modality ``m`` has identity covariance and class means
    ``+-separation[m] / 2 * d_m`` for a random unit direction ``d_m``, so the
    Mahalanobis distance between the class means equals ``separation[m]``.
    Optional MCAR cell and whole-modality missingness can be injected.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError("need at least 2 modalities of size >= 1")
    M = len(sizes)
    sep = np.broadcast_to(np.asarray(separation, dtype=float), (M,))
    names = list(names) if names is not None else [f"m{i}" for i in range(M)]
    rng = rng_for(seed, "simulate_multimodal")
    n_pos = int(round(positive_rate * n))
    y = rng.permutation(np.r_[np.ones(n_pos), np.zeros(n - n_pos)])
    mods = []
    for name, size, s in zip(names, sizes, sep):
        d = rng.normal(size=size)
        d /= np.linalg.norm(d)
        X = rng.normal(size=(n, size)) + np.outer(y - 0.5, s * d)
        mask = rng.random((n, size)) < cell_missing_rate
        mask |= (rng.random(n) < modality_missing_rate)[:, None]
        mods.append((name, MaskedMatrix(X, mask)))
    return ModalDataset(tuple(mods), y)


def modal_from_dataset(ds: Dataset, sep: str = ".") -> ModalDataset:
    """Group columns named ``<modality><sep><feature>`` into modalities (header order)."""
    groups: dict[str, list[int]] = {}
    for j, c in enumerate(ds.columns):
        groups.setdefault(c.name.split(sep, 1)[0], []).append(j)
    return ModalDataset(tuple((k, ds.features.columns(v)) for k, v in groups.items()), ds.target)


def dataset_from_modal(md: ModalDataset, name: str = "", sep: str = ".") -> Dataset:
    cols = tuple(Column(f"{k}{sep}{j}") for k, v in md.modalities for j in range(v.p))
    return Dataset(md.combined(), md.target, cols, name)
