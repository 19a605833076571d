"""Twist-operator expectation values and geometric phases for two-band models."""

from .bands import (
    BlochVector,
    ModeCouplings,
    ModeGeometry,
    MomentumGrid,
    SymmetryReport,
    build_grid,
    check_twist_symmetry,
    mode_angles,
    mode_couplings,
)
from .errors import (
    ConfigError,
    DegeneracyError,
    DegenerateCoefficientError,
    EvaluationError,
    GapClosureError,
    InvalidDimensionError,
    SingularModeError,
    StencilError,
    SymmetryError,
    TrivialTwistError,
    TwistError,
)
from .models import SSH, Custom, FreeFermion
from .twist import (
    ModeFactor,
    TwistResult,
    accumulate,
    evaluate,
    geometric_phase,
    mode_factor,
    mode_factor_printed,
)

__all__ = [
    "BlochVector",
    "ModeCouplings",
    "ModeGeometry",
    "MomentumGrid",
    "SymmetryReport",
    "build_grid",
    "check_twist_symmetry",
    "mode_angles",
    "mode_couplings",
    "ConfigError",
    "DegeneracyError",
    "DegenerateCoefficientError",
    "EvaluationError",
    "GapClosureError",
    "InvalidDimensionError",
    "SingularModeError",
    "StencilError",
    "SymmetryError",
    "TrivialTwistError",
    "TwistError",
    "SSH",
    "Custom",
    "FreeFermion",
    "ModeFactor",
    "TwistResult",
    "accumulate",
    "evaluate",
    "geometric_phase",
    "mode_factor",
    "mode_factor_printed",
]
