"""Exception hierarchy."""

from __future__ import annotations


class TwistError(Exception):
    """Base class for all errors raised by twistphase."""


class InvalidDimensionError(TwistError, ValueError):
    pass


class SingularModeError(TwistError):
    """A momentum where (R_x, R_y) vanishes, so the band angles are undefined."""

    def __init__(self, message: str, k=None):
        super().__init__(message if k is None else f"{message} at k={k}")
        self.k = k


class GapClosureError(SingularModeError):
    """A momentum where the Bloch vector vanishes (the two bands touch)."""


class TrivialTwistError(TwistError, ValueError):
    """The twist operator commutes with H, so z carries no information."""


class SymmetryError(TwistError):
    """R_y(k) = -R_y(-k) fails on the grid; the closed-form product does not apply."""


class EvaluationError(TwistError):
    pass


class DegenerateCoefficientError(TwistError, ZeroDivisionError):
    pass


class StencilError(TwistError):
    pass


class DegeneracyError(TwistError):
    """Zero-energy orbital: half filling is not unique."""


class ConfigError(TwistError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
