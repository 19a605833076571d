"""
Momentum grids, Bloch vectors and the band geometry of a two-band Hamiltonian.

A two-band Bloch Hamiltonian is written as

    H(k) = R_0(k) + R_x(k) sx + R_y(k) sy + R_z(k) sz

and everything downstream only needs the four-vector R(k) on a periodic
momentum grid, the polar/azimuthal angles of (R_x, R_y, R_z), and their
derivatives along the twist direction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GapClosureError, InvalidDimensionError, SingularModeError

TWO_PI = 2.0 * math.pi

# relative tolerance used to decide that (R_x, R_y) or R vanishes
SINGULAR_RTOL = 1e-12


# -----------------------------------------------------------------------------
# Trigonometry with exact values at the symmetry points
# -----------------------------------------------------------------------------

def lattice_trig(n, length):
    """
    Return ``(cos k, sin k)`` for ``k = 2*pi*n/length`` with integer ``n``.

    The values are computed on the reduced index ``min(m, L - m)`` so that the
    k <-> -k partners have exactly opposite sines, and k = pi/2, pi, 3pi/2,
    2pi give exact 0 and +-1.
    """
    n = np.asarray(n)
    length = np.asarray(length)
    m = np.mod(n, length)
    mirror = 2 * m > length
    mm = np.where(mirror, length - m, m)
    angle = TWO_PI * mm / length
    c = np.cos(angle)
    s = np.sin(angle)
    c = np.where(mm == 0, 1.0, c)
    s = np.where(mm == 0, 0.0, s)
    c = np.where(2 * mm == length, -1.0, c)
    s = np.where(2 * mm == length, 0.0, s)
    quarter = 4 * mm == length
    c = np.where(quarter, 0.0, c)
    s = np.where(quarter, 1.0, s)
    return c, np.where(mirror, -s, s)


_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def exact_trig(k):
    """``(cos k, sin k)`` for arbitrary real ``k``, snapped at multiples of pi/2."""
    k = np.asarray(k, dtype=float)
    q = k / (0.5 * math.pi)
    r = np.rint(q)
    snap = np.abs(q - r) < 1e-12
    c = np.cos(k)
    s = np.sin(k)
    idx = np.mod(r, 4).astype(int)
    table = np.array(_QUARTER_TURNS)
    c = np.where(snap, table[idx, 0], c)
    s = np.where(snap, table[idx, 1], s)
    return c, s


# -----------------------------------------------------------------------------
# Grid
# -----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """
    Periodic momentum grid ``k_a = 2*pi*n_a/L_a`` with ``n_a = 1..L_a``.

    Points are stored in lexicographic order of ``(n_1, ..., n_D)`` (last
    axis fastest). ``indices`` holds the integers, ``points`` the momenta.
    """

    dims: tuple[int, ...]
    indices: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def total_modes(self) -> int:
        return int(np.prod(self.dims))

    def trig(self):
        """``(cos, sin)`` arrays of shape ``(total_modes, D)``."""
        return lattice_trig(self.indices, np.asarray(self.dims))

    def partner_rows(self) -> np.ndarray:
        """Row index of the -k partner of every grid point."""
        dims = np.asarray(self.dims)
        partner = np.mod(dims - self.indices, dims)
        partner = np.where(partner == 0, dims, partner)
        return self.flat_index(partner)

    def flat_index(self, indices) -> np.ndarray:
        """Row number of integer index tuples (1-based, shape (..., D))."""
        indices = np.asarray(indices) - 1
        return np.ravel_multi_index(tuple(np.moveaxis(indices, -1, 0)), self.dims)

    def shift_rows(self, axis: int, step: int) -> np.ndarray:
        """Row index of the neighbour ``n_axis + step`` (periodic)."""
        shifted = self.indices.copy()
        length = self.dims[axis]
        shifted[:, axis] = np.mod(shifted[:, axis] - 1 + step, length) + 1
        return self.flat_index(shifted)

    def k(self, row: int) -> tuple[float, ...]:
        return tuple(float(x) for x in self.points[row])

    def __len__(self) -> int:
        return self.total_modes


def build_grid(dims) -> MomentumGrid:
    dims = tuple(int(x) for x in np.atleast_1d(dims)) if dims is not None else ()
    if not 1 <= len(dims) <= 3:
        raise InvalidDimensionError(f"need 1 to 3 axes, got {len(dims)}")
    if any(length < 2 for length in dims):
        raise InvalidDimensionError(f"every axis needs at least 2 sites, got {dims}")
    indices = np.array(
        list(itertools.product(*(range(1, length + 1) for length in dims))), dtype=np.int64
    )
    points = TWO_PI * indices / np.asarray(dims, dtype=float)
    indices.setflags(write=False)
    points.setflags(write=False)
    return MomentumGrid(dims=dims, indices=indices, points=points)


# -----------------------------------------------------------------------------
# Bloch vector and band geometry
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class BlochVector:
    r0: float
    rx: float
    ry: float
    rz: float

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.rx**2 + self.ry**2 + self.rz**2)

    def hamiltonian(self) -> np.ndarray:
        """The 2x2 matrix ``r0 + R.sigma``."""
        return np.array(
            [
                [self.r0 + self.rz, self.rx - 1j * self.ry],
                [self.rx + 1j * self.ry, self.r0 - self.rz],
            ]
        )


@dataclass(frozen=True, eq=False)
class ModeGeometry:
    theta: float
    gamma_angle: float
    e_minus: float
    e_plus: float
    nu_minus: np.ndarray
    nu_plus: np.ndarray


def mode_angles(r: BlochVector, k=None) -> ModeGeometry:
    """
    Polar angle, azimuth, band energies and eigenvectors of ``R.sigma``.

    The azimuth uses ``atan2`` so the quadrant survives R_x < 0. Energies are
    ``r0 -+ |R|``. Raises :class:`GapClosureError` for R = 0 and
    :class:`SingularModeError` for (R_x, R_y) = (0, 0).
    """
    big_r = r.magnitude
    rho = math.hypot(r.rx, r.ry)
    if big_r == 0.0:
        raise GapClosureError("Bloch vector vanishes", k)
    if rho <= SINGULAR_RTOL * big_r:
        raise SingularModeError("(R_x, R_y) = (0, 0)", k)
    # atan2 keeps full accuracy near the poles, where acos(rz/R) does not
    theta = math.atan2(rho, r.rz)
    gamma_angle = math.atan2(r.ry, r.rx)
    top = complex(r.rx, -r.ry)
    # R -+ R_z without cancellation: (R - R_z)(R + R_z) = rho^2
    if r.rz >= 0:
        up = big_r + r.rz
        down = rho * rho / up
    else:
        down = big_r - r.rz
        up = rho * rho / down
    nu_plus = np.array([top, down]) / math.sqrt(2.0 * big_r * down)
    nu_minus = np.array([top, -up]) / math.sqrt(2.0 * big_r * up)
    return ModeGeometry(
        theta=theta,
        gamma_angle=gamma_angle,
        e_minus=r.r0 - big_r,
        e_plus=r.r0 + big_r,
        nu_minus=nu_minus,
        nu_plus=nu_plus,
    )


def angle_arrays(rx, ry, rz):
    """Vectorised ``(theta, gamma)``; no singularity checks."""
    return np.arctan2(np.hypot(rx, ry), rz), np.arctan2(ry, rx)


def angle_derivatives(rx, ry, rz, drx, dry, drz):
    """
    Derivatives of ``theta`` and ``gamma`` given R and dR/dk.

    ``d theta = (rz (R.dR) - dR_z R^2) / (R^2 rho)`` and
    ``d gamma = (rx dR_y - ry dR_x) / rho^2`` with ``rho = |(R_x, R_y)|``.
    """
    rho2 = rx * rx + ry * ry
    r2 = rho2 + rz * rz
    dot = rx * drx + ry * dry + rz * drz
    with np.errstate(invalid="ignore", divide="ignore"):
        dtheta = (rz * dot - drz * r2) / (r2 * np.sqrt(rho2))
        dgamma = (rx * dry - ry * drx) / rho2
    return dtheta, dgamma


# -----------------------------------------------------------------------------
# Twist generator entries
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeCouplings:
    """Entries ``K'`` (diagonal, imaginary) and ``K`` of the band-basis twist generator."""

    kprime: complex
    kbig: complex

    def __post_init__(self):
        omega = self.omega
        if abs(complex(self.kprime).real) > 1e-12 * max(omega, 1.0):
            raise ValueError(f"K' must be purely imaginary, got {self.kprime!r}")

    @property
    def omega(self) -> float:
        return math.hypot(abs(self.kprime), abs(self.kbig))


def coupling_arrays(theta, gamma_angle, dtheta, dgamma):
    """Vectorised ``(K', K)`` from the angle fields and their derivatives."""
    kprime = -1j * np.sin(0.5 * theta) ** 2 * dgamma
    kbig = 0.5 * np.exp(1j * gamma_angle) * (dtheta + 1j * np.sin(theta) * dgamma)
    return kprime, kbig


def mode_couplings(theta_k: float, gamma_k: float, dtheta: float, dgamma: float) -> ModeCouplings:
    kprime, kbig = coupling_arrays(theta_k, gamma_k, dtheta, dgamma)
    # the real part of -1j*x is -0.0 or 0.0; keep it an exact imaginary number
    return ModeCouplings(kprime=complex(0.0, float(np.imag(kprime))), kbig=complex(kbig))


# -----------------------------------------------------------------------------
# Symmetry precondition
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    residual: float
    worst_k: tuple[float, ...]
    scale: float
    passed: bool


def check_twist_symmetry(model, grid: MomentumGrid) -> SymmetryReport:
    """Check ``R_y(k) = -R_y(-k)`` on every grid point."""
    bloch = model.bloch(grid)
    ry = bloch[:, 2]
    residuals = np.abs(ry + ry[grid.partner_rows()])
    worst = int(np.argmax(residuals))
    residual = float(residuals[worst])
    scale = max(float(model.energy_scale), float(np.max(np.abs(bloch))), 1.0)
    return SymmetryReport(
        residual=residual,
        worst_k=grid.k(worst),
        scale=scale,
        passed=residual <= 1e-12 * scale,
    )
