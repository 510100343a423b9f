"""Small datasets shipped with the package.

``breast_cancer``, ``wine`` (class 1 vs rest), ``iris`` (versicolor vs
virginica) and ``diabetes`` (regression) are copies of the classic UCI
tables; ``mixed`` is a synthetic logistic dataset with binary and
categorical columns.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .data import Dataset, load_csv, load_schema

CLASSIFICATION = ("breast_cancer", "wine", "iris")
REGRESSION = ("diabetes",)
MIXED = ("mixed",)


def bundled_names() -> list[str]:
    return list(CLASSIFICATION + REGRESSION + MIXED)


def bundled_path(name: str) -> Path:
    if name not in bundled_names():
        raise KeyError(f"no bundled dataset {name!r}; choose from {bundled_names()}")
    return Path(str(resources.files("missnet") / "datasets" / f"{name}.csv"))


def load_bundled(name: str) -> Dataset:
    path = bundled_path(name)
    ds = load_csv(path, load_schema(path.with_suffix(".schema")))
    return Dataset(ds.features, ds.target, ds.columns, name, ds.task)


def load_source(source: str) -> Dataset:
    """A bundled name, or a CSV path (with a sibling ``.schema`` file if present)."""
    if source in bundled_names():
        return load_bundled(source)
    path = Path(source)
    schema_path = path.with_suffix(".schema")
    ds = load_csv(path, load_schema(schema_path) if schema_path.exists() else None)
    return Dataset(ds.features, ds.target, ds.columns, ds.name or path.stem, ds.task)
