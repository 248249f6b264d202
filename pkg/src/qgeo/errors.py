"""Exception hierarchy shared by every qgeo module."""


class QGeoError(Exception):
    """Base class for all qgeo errors."""


class ValidationError(QGeoError, ValueError):
    """Input violates a documented invariant (NaN entries, bad config, shape mismatch)."""


class DatasetFormatError(QGeoError, ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if col is not None:
            loc.append(f"col {col}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.col = col


class DegeneracyError(QGeoError):
    """A normalization vector has a zero entry."""


class AsymmetryError(QGeoError):
    """Symmetrized Laplacian produced a clearly negative eigenvalue."""


class NumericError(QGeoError):
    """An iterative numerical procedure failed to converge."""


class NeighborhoodError(QGeoError):
    """An LPCA neighborhood is too small or spans no direction."""


class StatePreparationError(QGeoError):
    """A coherent state could not be prepared."""


class PipelineError(QGeoError):
    """Too many base points failed during distance-matrix assembly."""
