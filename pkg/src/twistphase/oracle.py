"""
Brute-force cross-checks for the closed forms.

- ``exp_factor_oracle``: exponentiate the 2x2 generator numerically.
- ``fd_couplings``: couplings from central differences of the band angles.
- ``ssh_determinant_z``: ``<g|eta|g>`` of the SSH ring as a Slater determinant.
- ``compare_variants``: tabulate every available per-mode form side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bands import ModeCouplings, MomentumGrid, angle_derivatives, mode_angles, mode_couplings
from .errors import DegeneracyError, SingularModeError, StencilError
from .models import SSH, FreeFermion, ssh_factor
from .twist import evaluate, factor_values, printed_factor_values, twist_size

DEVIATION_TOL = 1e-9


def generator_matrix(c: ModeCouplings) -> np.ndarray:
    kp = complex(c.kprime)
    kb = complex(c.kbig)
    return np.array([[kp, kb], [-kb.conjugate(), kp.conjugate()]])


def exp_factor_oracle(c: ModeCouplings, n_total: int) -> complex:
    """``(0, 0)`` entry of ``expm(-(2 pi / N) M)`` by Pade scaling-and-squaring."""
    return complex(scipy.linalg.expm(-(2.0 * math.pi / n_total) * generator_matrix(c))[0, 0])


def _wrap(x: float) -> float:
    return math.remainder(x, 2.0 * math.pi)


def fd_couplings(model, k, mu: int = 0, h: float = 1e-6) -> ModeCouplings:
    """
    Couplings at ``k`` from central differences of ``theta`` and ``gamma``.

    Only valid where both angles are smooth; the free-fermion azimuth jumps
    between +-pi/2, so that model is refused.
    """
    if isinstance(model, FreeFermion):
        raise StencilError("free-fermion azimuth is piecewise constant; use the closed-form K_mu")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    step = np.zeros_like(k)
    step[mu] = h
    try:
        centre = mode_angles(model.bloch_at(k), tuple(k))
        plus = mode_angles(model.bloch_at(k + step), tuple(k + step))
        minus = mode_angles(model.bloch_at(k - step), tuple(k - step))
    except SingularModeError as exc:
        raise StencilError(f"singular mode inside stencil: {exc}") from exc
    dtheta = (plus.theta - minus.theta) / (2.0 * h)
    dgamma = _wrap(plus.gamma_angle - minus.gamma_angle) / (2.0 * h)
    return mode_couplings(centre.theta, centre.gamma_angle, dtheta, dgamma)


# -----------------------------------------------------------------------------
# Real-space SSH determinant
# -----------------------------------------------------------------------------

def ssh_hamiltonian(phi: float, n_cells: int) -> np.ndarray:
    """Single-particle SSH ring, ``t(-1 + (-1)^l phi)`` on bond (l, l+1), sites l = 1..2n."""
    n_sites = 2 * n_cells
    h = np.zeros((n_sites, n_sites))
    for site in range(1, n_sites + 1):
        i, j = site - 1, site % n_sites
        hop = -1.0 + (-1.0) ** site * phi
        h[i, j] += hop
        h[j, i] += hop
    return h


def ssh_determinant_z(phi: float, n_cells: int) -> complex:
    """
    ``det(U_occ^dag T U_occ)`` for the half-filled SSH ring.

    ``T`` multiplies both sites of cell ``x`` (sites 2x-1, 2x) by
    ``exp(2 pi i x / n_cells)``.
    """
    if n_cells < 2 or n_cells > 512 or n_cells % 2:
        raise ValueError(f"n_cells must be even and in [2, 512], got {n_cells}")
    energies, vectors = np.linalg.eigh(ssh_hamiltonian(phi, n_cells))
    if np.any(np.abs(energies) < 1e-10):
        raise DegeneracyError(f"zero-energy orbital at phi={phi}, n_cells={n_cells}")
    occupied = vectors[:, energies < 0]
    cells = np.repeat(np.arange(1, n_cells + 1), 2)
    twist = np.exp(2j * math.pi * cells / n_cells)
    return complex(np.linalg.det(occupied.conj().T @ (twist[:, None] * occupied)))


# -----------------------------------------------------------------------------
# Variant comparison
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    k: tuple | None
    canonical: complex
    printed: complex
    oracle: complex
    model_specific: complex | None = None

    def deviations(self) -> dict[str, float]:
        out = {
            "canonical-oracle": abs(self.canonical - self.oracle),
            "canonical-printed": abs(self.canonical - self.printed),
            "printed-oracle": abs(self.printed - self.oracle),
        }
        if self.model_specific is not None:
            out["canonical-model"] = abs(self.canonical - self.model_specific)
        return out

    @property
    def max_deviation(self) -> float:
        return max(self.deviations().values())


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    n_total: int
    tol: float = DEVIATION_TOL
    pair_max: dict[str, float] = field(default_factory=dict)
    flagged: set[str] = field(default_factory=set)
    determinant: dict | None = None
    generic_ratio: float | None = None

    @property
    def max_deviation(self) -> float:
        return max(self.pair_max.values(), default=0.0)

    def summary(self) -> str:
        lines = [f"modes={len(self.rows)} N={self.n_total} tol={self.tol:g}"]
        for pair, dev in sorted(self.pair_max.items()):
            verdict = "DIVERGES" if pair in self.flagged else "agrees"
            lines.append(f"  {pair:<20s} max|diff|={dev:.3e}  {verdict}")
        if self.generic_ratio is not None:
            lines.append(f"  K_mu / generic |K| max ratio = {self.generic_ratio:.6g} (informational)")
        if self.determinant is not None:
            d = self.determinant
            lines.append(
                f"  determinant n_cells={d['n_cells']}: |z| closed={d['abs_closed']:.12g} "
                f"det={d['abs_det']:.12g} diff={d['abs_diff']:.3e}"
            )
        return "\n".join(lines)


def _build_report(ks, kprime, kbig, n_total, model_specific=None, tol=DEVIATION_TOL) -> ComparisonReport:
    canonical = factor_values(kprime, kbig, n_total)
    printed = printed_factor_values(kprime, kbig, n_total, strict=False)
    rows = []
    for i in range(len(canonical)):
        c = ModeCouplings(kprime=complex(0.0, kprime[i].imag), kbig=complex(kbig[i]))
        rows.append(
            ComparisonRow(
                k=ks[i] if ks is not None else None,
                canonical=complex(canonical[i]),
                printed=complex(printed[i]),
                oracle=exp_factor_oracle(c, n_total),
                model_specific=None if model_specific is None else complex(model_specific[i]),
            )
        )
    report = ComparisonReport(rows=rows, n_total=n_total, tol=tol)
    for row in rows:
        for pair, dev in row.deviations().items():
            dev = math.inf if math.isnan(dev) else dev
            report.pair_max[pair] = max(report.pair_max.get(pair, 0.0), dev)
    report.flagged = {pair for pair, dev in report.pair_max.items() if dev > tol}
    return report


def compare_couplings(couplings, n_total: int, tol: float = DEVIATION_TOL) -> ComparisonReport:
    """Compare the per-mode forms for a list of :class:`ModeCouplings`."""
    kprime = np.array([complex(c.kprime) for c in couplings])
    kbig = np.array([complex(c.kbig) for c in couplings])
    return _build_report(None, kprime, kbig, n_total, tol=tol)


def compare_variants(
    model,
    grid: MomentumGrid,
    twist_axis: int = 0,
    n_convention: str = "total",
    with_determinant: bool = False,
    tol: float = DEVIATION_TOL,
) -> ComparisonReport:
    """
    Canonical vs printed vs numerically exponentiated factor at every regular
    grid point, plus the model's own specialised form where one exists
    (``cos(2 pi |K_mu| / N)`` for the pairing model, the SSH ``K'`` form).
    """
    kprime, kbig, singular = model.couplings(grid, twist_axis)
    regular = np.flatnonzero(~singular)
    kprime, kbig = kprime[regular], kbig[regular]
    ks = [grid.k(int(r)) for r in regular]
    n_total = twist_size(grid, twist_axis, n_convention)

    specific = None
    if isinstance(model, FreeFermion):
        specific = np.cos(2.0 * math.pi * np.abs(kbig) / n_total)
    elif isinstance(model, SSH):
        specific = ssh_factor(kprime, n_total)

    report = _build_report(ks, kprime, kbig, n_total, specific, tol)

    if isinstance(model, FreeFermion):
        report.generic_ratio = _free_fermion_generic_ratio(model, grid, twist_axis, regular, kbig)
    if with_determinant and isinstance(model, SSH):
        closed = evaluate(model, grid, twist_axis, n_convention=n_convention)
        det_z = ssh_determinant_z(model.phi, grid.total_modes)
        report.determinant = {
            "n_cells": grid.total_modes,
            "z_closed": closed.z,
            "z_det": det_z,
            "abs_closed": abs(closed.z),
            "abs_det": abs(det_z),
            "abs_diff": abs(abs(closed.z) - abs(det_z)),
        }
    return report


def _free_fermion_generic_ratio(model, grid, axis, regular, kbig):
    """Largest ratio |K_mu| / (|d theta| / 2) where both are non-zero."""
    c, s = grid.trig()
    bloch = model.bloch(grid)[regular]
    drz = s[regular, axis]
    dry = model.gamma * c[regular, axis]
    zeros = np.zeros_like(drz)
    dtheta, _ = angle_derivatives(bloch[:, 1], bloch[:, 2], bloch[:, 3], zeros, dry, drz)
    generic = 0.5 * np.abs(dtheta)
    mask = (generic > 1e-12) & (np.abs(kbig) > 1e-12) & np.isfinite(generic)
    if not np.any(mask):
        return None
    return float(np.max(np.abs(kbig[mask]) / generic[mask]))
