"""
Per-mode twist factors, their product ``z = <g|eta|g>`` and the geometric phase.

In the band basis the twist generator at one momentum is the traceless
anti-Hermitian matrix ``M = [[K', K], [-K*, K'*]]`` with ``M^2 = -Omega^2``.
The factor contributed by a filled lower-band mode is the ``(0, 0)`` entry of
``exp(-(2 pi / N) M)``:

    f = cos(2 pi Omega / N) - (K' / Omega) sin(2 pi Omega / N)

The product over modes is accumulated as a sum of logarithms and a sum of
arguments so that neither underflow nor per-step phase wrapping occurs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bands import MomentumGrid, check_twist_symmetry
from .errors import (
    DegenerateCoefficientError,
    EvaluationError,
    InvalidDimensionError,
    SingularModeError,
    SymmetryError,
    TrivialTwistError,
)
from .models import detect_trivial_twist

ILL_DEFINED_THRESHOLD = 1e-12
SERIES_OMEGA = 1e-12


@dataclass(frozen=True)
class ModeFactor:
    value: complex
    k: tuple | None = None

    @property
    def log_abs(self) -> float:
        return math.log(abs(self.value)) if self.value != 0 else -math.inf

    @property
    def arg(self) -> float:
        return principal_angle(cmath.phase(self.value))


# -----------------------------------------------------------------------------
# Per-mode factors
# -----------------------------------------------------------------------------

def factor_values(kprime, kbig, n_total: int) -> np.ndarray:
    """Vectorised canonical factor for arrays of couplings."""
    kprime = np.asarray(kprime, dtype=complex)
    kbig = np.asarray(kbig, dtype=complex)
    omega = np.hypot(np.abs(kprime), np.abs(kbig))
    small = omega < SERIES_OMEGA
    safe = np.where(small, 1.0, omega)
    angle = 2.0 * math.pi * omega / n_total
    exact = np.cos(angle) - (kprime / safe) * np.sin(angle)
    return np.where(small, 1.0 - (2.0 * math.pi / n_total) * kprime, exact)


def mode_factor(c, n_total: int, k=None) -> ModeFactor:
    if n_total < 1:
        raise ValueError("n_total must be positive")
    return ModeFactor(value=complex(factor_values(c.kprime, c.kbig, n_total)), k=k)


def printed_factor_values(kprime, kbig, n_total: int, strict: bool = True) -> np.ndarray:
    """
    The per-mode bracket written with ``lambda_+-`` and ``C_+-^2``:

        1 - |K|^2/C_+^2 (e^{2 pi lambda_+/N} - 1) - |K|^2/C_-^2 (e^{2 pi lambda_-/N} - 1)

    with ``lambda_+- = +-i Omega`` and ``C_+-^2 = -|K|^2 + (lambda_+- - K')^2``.
    A term whose ``|K|^2`` is zero is dropped. A zero ``C^2`` with non-zero
    ``|K|^2`` raises when ``strict``, else yields NaN.
    """
    kprime = np.asarray(kprime, dtype=complex)
    kbig = np.asarray(kbig, dtype=complex)
    step = 2.0 * math.pi / n_total
    k2 = np.abs(kbig) ** 2
    omega = np.hypot(np.abs(kprime), np.abs(kbig))
    value = np.ones(np.broadcast(kprime, kbig).shape, dtype=complex)
    for sign in (1.0, -1.0):
        lam = sign * 1j * omega
        c2 = -k2 + (lam - kprime) ** 2
        degenerate = (c2 == 0) & (k2 != 0)
        if strict and np.any(degenerate):
            raise DegenerateCoefficientError("C^2 = 0 with non-zero |K|")
        with np.errstate(invalid="ignore", divide="ignore"):
            term = np.where(k2 == 0, 0.0, k2 / np.where(c2 == 0, 1.0, c2) * (np.exp(step * lam) - 1.0))
        value = value - term
        value = np.where(degenerate, np.nan, value)
    return value


def mode_factor_printed(c, n_total: int, k=None) -> ModeFactor:
    if n_total < 1:
        raise ValueError("n_total must be positive")
    return ModeFactor(value=complex(printed_factor_values(c.kprime, c.kbig, n_total)), k=k)


# -----------------------------------------------------------------------------
# Accumulation
# -----------------------------------------------------------------------------

def principal_angle(x: float) -> float:
    """Reduce to ``(-pi, pi]``."""
    y = math.remainder(x, 2.0 * math.pi)
    return math.pi if y <= -math.pi else y


def _unit(phase: float) -> complex:
    if phase == 0.0:
        return 1.0 + 0.0j
    if phase == math.pi:
        return -1.0 + 0.0j
    return complex(math.cos(phase), math.sin(phase))


@dataclass(frozen=True, eq=False)
class TwistResult:
    z: complex
    gamma_g: float | None
    log_abs_z: float
    n_modes: int
    ill_defined: bool
    phase: float = 0.0
    singular_modes: tuple = ()
    threshold: float = ILL_DEFINED_THRESHOLD
    factors: np.ndarray = field(default=None, repr=False)

    @property
    def abs_z(self) -> float:
        return math.exp(self.log_abs_z)


def accumulate_values(values, threshold: float = ILL_DEFINED_THRESHOLD) -> TwistResult:
    """
    Product of per-mode factors in the given (grid) order.

    Arguments are split into whole half-turns and a remainder in
    ``[-pi/2, pi/2]``; the half-turns are counted exactly and the remainders
    are summed with ``math.fsum``, so the result is independent of how the
    factors were produced and real products stay exactly real.
    """
    values = np.asarray(values, dtype=complex).ravel()
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(values))
    args = np.angle(values)
    half_turns = np.rint(args / math.pi)
    rest = args - half_turns * math.pi
    log_abs_z = math.fsum(log_abs.tolist()) if len(values) else 0.0
    phase = principal_angle(int(np.sum(half_turns, dtype=np.int64) % 2) * math.pi + math.fsum(rest.tolist()))
    modulus = math.exp(log_abs_z)
    z = modulus * _unit(phase)
    ill = not modulus >= threshold
    return TwistResult(
        z=z,
        gamma_g=None if ill else phase,
        log_abs_z=log_abs_z,
        n_modes=len(values),
        ill_defined=ill,
        phase=phase,
        threshold=threshold,
        factors=values,
    )


def accumulate(factors, threshold: float = ILL_DEFINED_THRESHOLD) -> TwistResult:
    """Accumulate an ordered list of :class:`ModeFactor`."""
    return accumulate_values([f.value for f in factors], threshold)


def geometric_phase(r, threshold: float | None = None) -> float | None:
    """
    ``Arg z`` in ``(-pi, pi]``, or ``None`` where ``|z|`` is below threshold.

    Accepts a :class:`TwistResult` or a bare complex number.
    """
    if isinstance(r, TwistResult):
        if threshold is None:
            return r.gamma_g
        return None if not r.abs_z >= threshold else r.phase
    z = complex(r)
    if threshold is None:
        threshold = ILL_DEFINED_THRESHOLD
    if not abs(z) >= threshold:
        return None
    return principal_angle(cmath.phase(z))


# -----------------------------------------------------------------------------
# Model evaluation
# -----------------------------------------------------------------------------

def twist_size(grid: MomentumGrid, axis: int, n_convention: str = "total") -> int:
    """The ``N`` in ``2 pi / N``: all cells (default) or the length of the twist axis."""
    if n_convention == "total":
        return grid.total_modes
    if n_convention == "linear":
        return grid.dims[axis]
    raise ValueError(f"unknown N convention {n_convention!r}")


def evaluate(
    model,
    grid: MomentumGrid,
    twist_axis: int = 0,
    threshold: float = ILL_DEFINED_THRESHOLD,
    n_convention: str = "total",
    strict: bool = False,
) -> TwistResult:
    """
    ``z`` and ``gamma_g`` of ``model`` on ``grid`` with the twist along ``twist_axis`` (0-based).

    Singular modes (gap closure or vanishing ``(R_x, R_y)``) are left out of
    the product and listed in ``singular_modes``; with ``strict`` the first
    one raises instead.
    """
    if detect_trivial_twist(model):
        raise TrivialTwistError("gamma = 0: [H, eta] = 0 and the twist is trivial")
    if getattr(model, "d", grid.ndim) != grid.ndim:
        raise InvalidDimensionError(f"model is {model.d}-dimensional, grid is {grid.ndim}-dimensional")
    if not 0 <= twist_axis < grid.ndim:
        raise InvalidDimensionError(f"twist axis {twist_axis} outside 0..{grid.ndim - 1}")
    report = check_twist_symmetry(model, grid)
    if not report.passed:
        raise SymmetryError(
            f"R_y(k) + R_y(-k) = {report.residual:.3g} at k={report.worst_k}; closed form does not apply"
        )
    kprime, kbig, singular = model.couplings(grid, twist_axis)
    singular_rows = np.flatnonzero(singular)
    if len(singular_rows) == grid.total_modes:
        raise EvaluationError("every grid mode is singular")
    if strict and len(singular_rows):
        raise SingularModeError("singular mode on grid", grid.k(int(singular_rows[0])))
    n_total = twist_size(grid, twist_axis, n_convention)
    values = factor_values(kprime[~singular], kbig[~singular], n_total)
    result = accumulate_values(values, threshold)
    return replace(result, singular_modes=tuple(grid.k(int(r)) for r in singular_rows))
