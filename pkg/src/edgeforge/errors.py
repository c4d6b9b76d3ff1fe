"""Exception hierarchy shared by all edgeforge modules."""

from __future__ import annotations


class ForgeError(Exception):
    """Base class for every error raised by edgeforge."""


class InputError(ForgeError, ValueError):
    """Malformed or out-of-range input data (vertex ids, files, vectors)."""


class ParameterError(ForgeError, ValueError):
    """A numeric parameter lies outside its admissible domain."""


class DomainError(ParameterError):
    """A spectral parameter lies outside the upper half plane."""


class ResourceError(ForgeError, MemoryError):
    """A projected allocation or amount of work exceeds the configured cap."""


class NumericError(ForgeError, ArithmeticError):
    """An iterative solver failed to converge or hit a vanishing pivot.

    Parameters
    ----------
    message : str
        Human readable description.
    partial : object, optional
        Last iterate or partial result, kept for diagnostics.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class SamplingError(ForgeError, RuntimeError):
    """A random sampler has nothing eligible to draw from."""


class ConsistencyError(ForgeError, RuntimeError):
    """Stored data no longer matches the object it was computed against."""


class ConstructionError(ForgeError, RuntimeError):
    """A randomized construction exhausted its retry budget.

    Parameters
    ----------
    message : str
        Human readable description.
    stage : str, optional
        Pipeline stage that failed.
    best : object, optional
        Best value achieved before giving up (e.g. a girth).
    """

    def __init__(self, message: str, stage: str | None = None, best=None):
        super().__init__(message if stage is None else f"[{stage}] {message}")
        self.stage = stage
        self.best = best
