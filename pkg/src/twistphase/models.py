"""
Closed-form two-band models.

``FreeFermion``  D-dimensional hopping + pairing model, R = (0, g*sum sin k, lam - sum cos k)
``SSH``          dimerised chain, R = (-(1+phi) - (1-phi) cos k, -(1-phi) sin k, 0)
``Custom``       Bloch vectors tabulated on a grid

Every model exposes the same small surface used by the twist engine:
``bloch(grid)``, ``couplings(grid, axis)`` and ``energy_scale``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .bands import (
    SINGULAR_RTOL,
    TWO_PI,
    BlochVector,
    MomentumGrid,
    angle_arrays,
    angle_derivatives,
    build_grid,
    coupling_arrays,
    exact_trig,
)
from .errors import (
    ConfigError,
    GapClosureError,
    InvalidDimensionError,
    SingularModeError,
    StencilError,
    TrivialTwistError,
)


def _as_momentum(k, d: int) -> np.ndarray:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (d,):
        raise InvalidDimensionError(f"momentum needs {d} components, got {k.shape}")
    return k


def _generic_couplings(bloch, dbloch, scale):
    """(K', K, singular) through the angle pipeline, given R and dR/dk."""
    _, rx, ry, rz = bloch.T
    _, drx, dry, drz = dbloch.T
    big_r = np.sqrt(rx * rx + ry * ry + rz * rz)
    singular = (np.hypot(rx, ry) <= SINGULAR_RTOL * np.maximum(big_r, scale))
    theta, gamma = angle_arrays(rx, ry, rz)
    dtheta, dgamma = angle_derivatives(rx, ry, rz, drx, dry, drz)
    kprime, kbig = coupling_arrays(theta, gamma, dtheta, dgamma)
    kprime = 1j * kprime.imag
    kprime[singular] = 0.0
    kbig[singular] = 0.0
    return kprime, kbig, singular


# -----------------------------------------------------------------------------
# Free-fermion model
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeFermion:
    """Nearest-neighbour hopping, pairing ``gamma`` and chemical potential ``lam``."""

    d: int
    lam: float
    gamma: float

    params = ("lambda", "gamma")

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InvalidDimensionError(f"free-fermion model needs D in 1..3, got {self.d}")

    @property
    def energy_scale(self) -> float:
        return abs(self.lam) + self.d * (1.0 + abs(self.gamma))

    def with_param(self, name: str, value: float) -> "FreeFermion":
        if name == "lambda":
            return replace(self, lam=value)
        if name == "gamma":
            return replace(self, gamma=value)
        raise ConfigError(f"free_fermion has no parameter {name!r}")

    def _fields(self, c, s):
        sum_cos = c.sum(axis=-1)
        sum_sin = s.sum(axis=-1)
        rz = self.lam - sum_cos
        ry = self.gamma * sum_sin
        return sum_sin, ry, rz

    def bloch(self, grid: MomentumGrid) -> np.ndarray:
        c, s = grid.trig()
        _, ry, rz = self._fields(c, s)
        zeros = np.zeros_like(ry)
        return np.stack([zeros, zeros, ry, rz], axis=1)

    def bloch_at(self, k) -> BlochVector:
        c, s = exact_trig(_as_momentum(k, self.d))
        _, ry, rz = self._fields(c, s)
        return BlochVector(0.0, 0.0, float(ry), float(rz))

    def kmu_arrays(self, c, s, axis: int):
        """Closed-form K_mu, with a singular mask where the gap closes."""
        sum_sin, ry, rz = self._fields(c, s)
        gap = np.hypot(ry, rz)
        singular = gap <= SINGULAR_RTOL * self.energy_scale
        safe = np.where(singular, 1.0, gap)
        numer = -1j * self.gamma * rz * (c[..., axis] * rz - s[..., axis] * sum_sin)
        kbig = np.where(singular, 0.0, numer / (2.0 * safe**3))
        return kbig, singular

    def couplings(self, grid: MomentumGrid, axis: int = 0):
        c, s = grid.trig()
        kbig, singular = self.kmu_arrays(c, s, axis)
        return np.zeros(len(kbig), dtype=complex), kbig.astype(complex), singular


def free_fermion_R(k, spec: FreeFermion) -> BlochVector:
    return spec.bloch_at(k)


def free_fermion_Kmu(k, spec: FreeFermion, mu: int = 0) -> complex:
    """
    Pairing-model coupling ``K_mu`` at momentum ``k`` (``mu`` is 0-based).

    The diagonal entry is identically zero for this model, so the per-mode
    twist factor is ``cos(2*pi*|K_mu|/N)``.
    """
    if spec.gamma == 0:
        raise TrivialTwistError("gamma = 0: the twist operator commutes with H")
    k = _as_momentum(k, spec.d)
    if not 0 <= mu < spec.d:
        raise InvalidDimensionError(f"twist axis {mu} outside 0..{spec.d - 1}")
    c, s = exact_trig(k)
    kbig, singular = spec.kmu_arrays(c, s, mu)
    if singular:
        raise GapClosureError("gapless mode (Lambda_k = 0)", tuple(k))
    return complex(kbig)


def free_fermion_gap(grid: MomentumGrid, spec: FreeFermion):
    """Minimum of the dispersion ``Lambda_k`` over the grid and where it occurs."""
    bloch = spec.bloch(grid)
    gap = np.hypot(bloch[:, 2], bloch[:, 3])
    row = int(np.argmin(gap))
    return float(gap[row]), grid.k(row)


@dataclass(frozen=True)
class Dispersion:
    t_k: float
    delta_k: float

    @property
    def lambda_k(self) -> float:
        return math.hypot(self.t_k, self.delta_k)


def dispersion(k, spec: FreeFermion) -> Dispersion:
    c, s = exact_trig(_as_momentum(k, spec.d))
    return Dispersion(t_k=float(c.sum() - spec.lam), delta_k=float(spec.gamma * s.sum()))


def detect_trivial_twist(spec) -> bool:
    return isinstance(spec, FreeFermion) and spec.gamma == 0


# -----------------------------------------------------------------------------
# SSH chain
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class SSH:
    """Dimerised chain with ``t = 1`` and uniform dimerisation ``phi``; one k per two-site cell."""

    phi: float

    d = 1
    params = ("phi",)
    energy_scale = 2.0

    def __post_init__(self):
        if not -1.0 <= self.phi <= 1.0:
            raise ValueError(f"SSH dimerisation must lie in [-1, 1], got {self.phi}")

    def with_param(self, name: str, value: float) -> "SSH":
        if name != "phi":
            raise ConfigError(f"ssh has no parameter {name!r}")
        return replace(self, phi=value)

    def _fields(self, c, s):
        a = 1.0 + self.phi
        b = 1.0 - self.phi
        rx = -a - b * c
        ry = -b * s
        return rx, ry, b * s, -b * c

    def bloch(self, grid: MomentumGrid) -> np.ndarray:
        c, s = grid.trig()
        rx, ry, _, _ = self._fields(c[:, 0], s[:, 0])
        zeros = np.zeros_like(rx)
        return np.stack([zeros, rx, ry, zeros], axis=1)

    def bloch_at(self, k) -> BlochVector:
        c, s = exact_trig(_as_momentum(k, 1))
        rx, ry, _, _ = self._fields(c[0], s[0])
        return BlochVector(0.0, float(rx), float(ry), 0.0)

    def couplings(self, grid: MomentumGrid, axis: int = 0):
        c, s = grid.trig()
        rx, ry, drx, dry = self._fields(c[:, 0], s[:, 0])
        zeros = np.zeros_like(rx)
        bloch = np.stack([zeros, rx, ry, zeros], axis=1)
        dbloch = np.stack([zeros, drx, dry, zeros], axis=1)
        return _generic_couplings(bloch, dbloch, self.energy_scale)


def ssh_R(k, spec: SSH) -> BlochVector:
    return spec.bloch_at(k)


def ssh_Kprime(k, spec: SSH) -> complex:
    """Closed-form ``K'`` of the SSH chain (purely imaginary)."""
    phi = spec.phi
    c, s = exact_trig(_as_momentum(k, 1))
    c, s = float(c[0]), float(s[0])
    numer = (1 - phi) ** 2 + (1 - phi**2) * c
    denom = (1 - phi) ** 2 * s**2 + (1 + phi + (1 - phi) * c) ** 2
    if denom <= SINGULAR_RTOL:
        raise SingularModeError("SSH gap closes", (float(np.asarray(k).ravel()[0]),))
    return complex(0.0, -0.5 * numer / denom)


def ssh_factor(kprime, n_total: int):
    """
    SSH per-mode factor in the specialised form

        cos(2 sqrt2 pi |K'| / N) - i Im K' / (sqrt2 |K'|) sin(2 sqrt2 pi |K'| / N)
    """
    kprime = np.asarray(kprime, dtype=complex)
    mag = np.abs(kprime)
    arg = 2.0 * math.sqrt(2.0) * math.pi * mag / n_total
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(mag > 0, kprime.imag / (math.sqrt(2.0) * np.where(mag > 0, mag, 1.0)), 0.0)
    return np.cos(arg) - 1j * ratio * np.sin(arg)


# -----------------------------------------------------------------------------
# Tabulated model
# -----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Custom:
    """
    Bloch vectors tabulated on a grid (rows in grid order, columns r0, rx, ry, rz).

    Derivatives along the twist axis are periodic central differences of the
    table, taken on R itself so gauge jumps in the azimuth do not matter.
    """

    dims: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    params = ()

    def __post_init__(self):
        grid = build_grid(self.dims)
        table = np.asarray(self.table, dtype=float)
        if table.shape != (grid.total_modes, 4):
            raise ValueError(
                f"table must cover the full {self.dims} grid: expected "
                f"{(grid.total_modes, 4)}, got {table.shape}"
            )
        object.__setattr__(self, "table", table)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def energy_scale(self) -> float:
        return max(float(np.max(np.abs(self.table[:, 1:]))), 1e-300)

    def with_param(self, name, value):
        raise ConfigError("custom models have no sweepable parameters")

    @classmethod
    def from_function(cls, func, dims) -> "Custom":
        """Tabulate ``func(k) -> (r0, rx, ry, rz)`` on the grid."""
        grid = build_grid(dims)
        rows = [func(k) for k in grid.points]
        return cls(dims=grid.dims, table=np.array(rows, dtype=float))

    def _check_grid(self, grid: MomentumGrid):
        if tuple(grid.dims) != tuple(self.dims):
            raise InvalidDimensionError(f"table is defined on {self.dims}, not {grid.dims}")

    def bloch(self, grid: MomentumGrid) -> np.ndarray:
        self._check_grid(grid)
        return self.table

    def bloch_at(self, k):
        raise StencilError("tabulated model has no continuous R(k)")

    def couplings(self, grid: MomentumGrid, axis: int = 0):
        self._check_grid(grid)
        step = TWO_PI / self.dims[axis]
        forward = self.table[grid.shift_rows(axis, +1)]
        backward = self.table[grid.shift_rows(axis, -1)]
        dbloch = (forward - backward) / (2.0 * step)
        return _generic_couplings(self.table, dbloch, self.energy_scale)


def load_table(text: str, dims) -> Custom:
    """
    Parse a whitespace table: ``n_1 .. n_D r0 rx ry rz`` per line, ``#`` comments.
    """
    grid = build_grid(dims)
    d = grid.ndim
    table = np.full((grid.total_modes, 4), np.nan)
    seen = np.zeros(grid.total_modes, dtype=bool)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != d + 4:
            raise ConfigError(f"expected {d + 4} columns, got {len(parts)}", lineno)
        try:
            idx = [int(p) for p in parts[:d]]
            values = [float(p) for p in parts[d:]]
        except ValueError as exc:
            raise ConfigError(str(exc), lineno) from None
        if any(not 1 <= n <= length for n, length in zip(idx, grid.dims)):
            raise ConfigError(f"index {idx} outside grid {grid.dims}", lineno)
        row = int(grid.flat_index(idx))
        if seen[row]:
            raise ConfigError(f"duplicate grid point {idx}", lineno)
        seen[row] = True
        table[row] = values
    if not seen.all():
        missing = grid.indices[int(np.argmin(seen))]
        raise ConfigError(f"table does not cover grid point {tuple(int(x) for x in missing)}")
    return Custom(dims=grid.dims, table=table)


ModelSpec = Union[FreeFermion, SSH, Custom]
