"""Exception types raised across the package."""


class MissnetError(Exception):
    """Base class for all package errors."""


# data
class ParseError(MissnetError):
    def __init__(self, row, col, token=None):
        self.row, self.col, self.token = row, col, token
        super().__init__(f"cannot parse cell at row {row}, column {col}: {token!r}")


class TargetMissingError(MissnetError):
    pass


class SchemaError(MissnetError):
    pass


class UnknownCategoryError(MissnetError):
    pass


class EmptyColumnError(MissnetError):
    pass


class SplitError(MissnetError):
    pass


class RebalanceError(MissnetError):
    pass


class MissingValueError(MissnetError):
    """An observed-cell accessor touched a cell flagged missing."""


# corrupt
class TooFewRowsError(MissnetError):
    pass


class SpecError(MissnetError):
    pass


class RankError(MissnetError):
    pass


class AugmentError(MissnetError):
    pass


# impute
class FitError(MissnetError):
    pass


class ImputeError(MissnetError):
    pass


class NotFittedError(MissnetError):
    pass


# nn
class ShapeError(MissnetError):
    pass


class StateError(MissnetError):
    pass


class MissingNotAllowedError(MissnetError):
    pass


class DivergenceError(MissnetError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")


# metrics
class MetricError(MissnetError):
    pass


# harness
class ExperimentError(MissnetError):
    """A pipeline stage failed; carries the repetition and seed it failed under."""

    def __init__(self, message, repetition=None, seed=None):
        self.repetition, self.seed = repetition, seed
        super().__init__(f"repetition {repetition} (seed {seed}): {message}")
