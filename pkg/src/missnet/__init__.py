"""Neural networks that take missing inputs directly, plus the tooling to compare
them against imputation: corruption simulators, imputers, metrics and experiments."""

from .data import Dataset, MaskedMatrix, ModalDataset

__version__ = "0.1.0"

__all__ = ["Dataset", "MaskedMatrix", "ModalDataset", "__version__"]
