"""
Acceptance suite: one group of tests per criterion, each at its stated
tolerance. Run with ``pytest tests/test_acceptance.py`` (or execute this file);
the terminal summary lists PASS/FAIL per criterion.

Criteria that the implementation cannot meet are asserted as stated and left
failing; they are not relaxed here.
"""

from __future__ import annotations

import cmath
import functools
import math

import numpy as np
import pytest

from twistphase.bands import ModeCouplings, build_grid
from twistphase.errors import ConfigError, TrivialTwistError
from twistphase.models import SSH, FreeFermion, ssh_factor, ssh_Kprime
from twistphase.oracle import (
    compare_couplings,
    compare_variants,
    exp_factor_oracle,
    ssh_determinant_z,
)
from twistphase.sweep import (
    detect_transitions,
    emit,
    finite_size_trend,
    parse_config,
    point_spec,
    run_sweep,
)
from twistphase.twist import evaluate, factor_values, mode_factor, mode_factor_printed

PI = math.pi
criterion = pytest.mark.criterion

SSH_PHIS = (-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0)
D1_SWEEP = "model=free_fermion d=1 lambda=sweep(0,2,201) gamma=1 dims=2001"
SSH_SWEEP = "model=ssh phi=sweep(-1,1,201) dims=1001"
D2_LAMBDAS = (2.2, 2.6, 3.0, 3.5)


# -----------------------------------------------------------------------------
# Shared, cached evaluations (criterion 12 re-reads all of them)
# -----------------------------------------------------------------------------

_FACTOR_BOUND = 1 + 1e-12
_Z_BOUND = 1 + 1e-9


@functools.lru_cache(maxsize=None)
def run(model, dims):
    return evaluate(model, build_grid(dims))


@functools.lru_cache(maxsize=None)
def sweep_table(config):
    return run_sweep(parse_config(config))


def random_couplings(seed=2024, count=1000, bound=10.0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        radius = bound * math.sqrt(rng.uniform())
        angle = rng.uniform(-PI, PI)
        c = ModeCouplings(complex(0.0, rng.uniform(-bound, bound)), cmath.rect(radius, angle))
        out.append((c, int(rng.integers(2, 10**6 + 1))))
    return out


def d1_point_models():
    return [FreeFermion(1, float(lam), 1.0) for lam in np.linspace(0, 2, 201)]


def all_evaluations():
    """Every (model, dims) evaluated by criteria 3 to 10."""
    cases = []
    cases += [(SSH(phi), (201,)) for phi in SSH_PHIS]
    cases += [(SSH(phi), (n,)) for n in (4, 6, 8, 10) for phi in SSH_PHIS]
    cases += [(SSH(-0.5), (1001,)), (SSH(0.5), (1001,))]
    cases += [(SSH(0.0), (n,)) for n in (101, 401, 1601)]
    cases += [(SSH(float(phi)), (201,)) for phi in np.linspace(-1, 1, 101) if abs(phi) >= 0.02]
    cases += [(m, (2001,)) for m in d1_point_models()]
    cases += [(FreeFermion(1, 0.99, 1.0), (n,)) for n in (501, 1001, 2001)]
    cases += [(FreeFermion(1, 1.0, 1.0), (n,)) for n in (101, 401, 1601)]
    cases += [(FreeFermion(2, lam, 1.0), (51, 51)) for lam in D2_LAMBDAS]
    cases += [(FreeFermion(2, 2.0, 1.0), (n, n)) for n in (11, 21, 41)]
    cases += [(FreeFermion(3, lam, 1.0), (21, 21, 21)) for lam in (3.2, 4.0)]
    return cases


# -----------------------------------------------------------------------------
# 1. Oracle equivalence
# -----------------------------------------------------------------------------

@criterion("1", "canonical factor == expm oracle within 1e-12 (1000 random couplings)")
def test_c1_oracle_equivalence():
    worst = 0.0
    for c, n in random_couplings():
        worst = max(worst, abs(mode_factor(c, n).value - exp_factor_oracle(c, n)))
    assert worst <= 1e-12, worst


# -----------------------------------------------------------------------------
# 2. Printed-formula ledger
# -----------------------------------------------------------------------------

@criterion("2", "printed product form vs canonical/oracle at K'=i/2, K=0, N=4; flags only that class")
def test_c2_printed_form_class():
    c = ModeCouplings(0.5j, 0j)
    expected = cmath.exp(-1j * PI / 4)
    assert mode_factor_printed(c, 4).value == 1
    assert abs(mode_factor(c, 4).value - expected) <= 1e-9
    assert abs(exp_factor_oracle(c, 4) - expected) <= 1e-9
    report = compare_couplings([c], 4, tol=1e-9)
    assert report.flagged == {"canonical-printed", "printed-oracle"}


@criterion("2", "printed product form vs canonical/oracle at K'=i/2, K=0, N=4; flags only that class")
@pytest.mark.parametrize("d, dims", [(1, (101,)), (2, (21, 21)), (3, (9, 9, 9))])
def test_c2_nothing_flagged_without_kprime(d, dims):
    report = compare_variants(FreeFermion(d, 0.5, 1.0), build_grid(dims), tol=1e-9)
    assert report.flagged == set(), report.summary()


# -----------------------------------------------------------------------------
# 3. SSH consistency
# -----------------------------------------------------------------------------

@criterion("3", "SSH canonical factor == specialised SSH form within 1e-12, dims=[201]")
@pytest.mark.parametrize("phi", SSH_PHIS)
def test_c3_ssh_specialised_form(phi):
    spec = SSH(phi)
    grid = build_grid([201])
    kprime, kbig, singular = spec.couplings(grid)
    for row in np.flatnonzero(~singular):
        printed = ssh_factor(ssh_Kprime(grid.points[row], spec), grid.total_modes)
        canonical = factor_values(kprime[row], kbig[row], grid.total_modes)
        assert abs(complex(canonical) - complex(printed)) <= 1e-12


# -----------------------------------------------------------------------------
# 4. SSH many-body oracle
# -----------------------------------------------------------------------------

def _same_phase_up_to_conjugation(a, b, tol):
    return abs(math.remainder(a - b, 2 * PI)) <= tol or abs(math.remainder(a + b, 2 * PI)) <= tol


@criterion("4", "SSH |z| and gamma_g vs Slater determinant within 1e-8 (n_cells 4..10, phi +-0.5, +-1)")
@pytest.mark.parametrize("n_cells", [4, 6, 8, 10])
@pytest.mark.parametrize("phi", [-1.0, -0.5, 0.5, 1.0])
def test_c4_determinant_oracle(phi, n_cells):
    closed = run(SSH(phi), (n_cells,))
    det = ssh_determinant_z(phi, n_cells)
    assert abs(abs(closed.z) - abs(det)) <= 1e-8
    assert _same_phase_up_to_conjugation(closed.gamma_g, cmath.phase(det), 1e-8)


@criterion("4+", "oracle invariant: determinant |z| == closed form within 1e-8 for phi +-0.25..+-1")
@pytest.mark.parametrize("n_cells", [4, 6, 8, 10])
@pytest.mark.parametrize("phi", SSH_PHIS)
def test_c4_determinant_modulus_extended(phi, n_cells):
    closed = run(SSH(phi), (n_cells,))
    assert abs(abs(closed.z) - abs(ssh_determinant_z(phi, n_cells))) <= 1e-8


# -----------------------------------------------------------------------------
# 5. SSH plateaus
# -----------------------------------------------------------------------------

@criterion("5", "SSH plateaus at dims=[1001]: -pi for phi<0, 0 for phi>0, one jump at phi=0")
def test_c5_plateaus():
    neg = run(SSH(-0.5), (1001,))
    pos = run(SSH(0.5), (1001,))
    assert abs(abs(neg.gamma_g) - PI) <= 0.05
    assert abs(pos.gamma_g) <= 0.05


@criterion("5", "SSH plateaus at dims=[1001]: -pi for phi<0, 0 for phi>0, one jump at phi=0")
def test_c5_single_jump():
    jumps = [t for t in detect_transitions(sweep_table(SSH_SWEEP)) if t.kind == "gamma-jump"]
    assert len(jumps) == 1
    assert jumps[0].lo <= 0.0 <= jumps[0].hi


@criterion("5", "SSH plateaus at dims=[1001]: -pi for phi<0, 0 for phi>0, one jump at phi=0")
def test_c5_critical_point_trend_logged(acceptance_log):
    for n in (101, 401, 1601):
        r = run(SSH(0.0), (n,))
        gamma = "nan" if r.gamma_g is None else f"{r.gamma_g:.6f}"
        acceptance_log(f"SSH phi=0 dims=[{n}]: gamma_g={gamma} |z|={r.abs_z:.6f} (claimed trend: pi)")


# -----------------------------------------------------------------------------
# 6. SSH non-nodal
# -----------------------------------------------------------------------------

@criterion("6", "SSH |z| > 1e-3 for |phi| >= 0.02 on 101 points, dims=[201]")
def test_c6_non_nodal():
    for phi in np.linspace(-1, 1, 101):
        if abs(phi) < 0.02:
            continue
        assert run(SSH(float(phi)), (201,)).abs_z > 1e-3, phi


# -----------------------------------------------------------------------------
# 7. D=1 critical signature
# -----------------------------------------------------------------------------

@criterion("7a", "D=1 global |z| minimum within 0.02 of lambda=1 (dims=[2001])")
def test_c7a_global_minimum():
    table = sweep_table(D1_SWEEP)
    abs_z = table.column("abs_z")
    where = table.column("param")[int(np.nanargmin(abs_z))]
    assert abs(where - 1.0) <= 0.02


@criterion("7b", "D=1 |z| at lambda=0.99 decreases across dims 501, 1001, 2001")
def test_c7b_near_critical_decrease(acceptance_log):
    values = [run(FreeFermion(1, 0.99, 1.0), (n,)).abs_z for n in (501, 1001, 2001)]
    acceptance_log(f"D=1 lambda=0.99 |z| at dims 501/1001/2001: {values}")
    assert values[0] > values[1] > values[2]


@criterion("7c", "D=1 1-|z| at lambda=1 decreases across dims 101, 401, 1601")
def test_c7c_critical_trend():
    spec = point_spec(FreeFermion(1, 1.0, 1.0), (101,), sizes=((101,), (401,), (1601,)))
    gaps = 1.0 - finite_size_trend(spec).column("abs_z")
    assert gaps[0] > gaps[1] > gaps[2]


@criterion("7+", "sweep invariant: exactly one z-minimum in [0.9, 1.1], no gamma-jump outside it")
def test_c7_detect_transitions_reference(acceptance_log):
    found = detect_transitions(sweep_table(D1_SWEEP))
    acceptance_log(f"D=1 reference sweep transitions: {[(t.kind, t.value) for t in found]}")
    minima = [t for t in found if t.kind == "z-minimum"]
    assert len(minima) == 1 and 0.9 <= minima[0].value <= 1.1
    assert not [t for t in found if t.kind == "gamma-jump" and not 0.9 <= t.value <= 1.1]


# -----------------------------------------------------------------------------
# 8. D=1 reality
# -----------------------------------------------------------------------------

@criterion("8", "free-fermion z is real, gamma_g in {0, pi} at every sweep point")
def test_c8_reality():
    table = sweep_table(D1_SWEEP)
    evaluated = np.isfinite(table.column("abs_z"))
    assert np.all(table.column("im_z")[evaluated] == 0.0)
    gamma = table.column("gamma_g")
    assert set(gamma[np.isfinite(gamma)]) <= {0.0, PI}
    for model, dims in all_evaluations():
        if isinstance(model, FreeFermion):
            r = run(model, dims)
            assert r.z.imag == 0.0 and r.gamma_g in (0.0, PI, None)


# -----------------------------------------------------------------------------
# 9. D=2
# -----------------------------------------------------------------------------

@criterion("9a", "D=2 |z| strictly increasing on lambda 2.2, 2.6, 3.0, 3.5 (dims=[51,51])")
def test_c9a_increasing():
    values = [run(FreeFermion(2, lam, 1.0), (51, 51)).abs_z for lam in D2_LAMBDAS]
    assert all(a < b for a, b in zip(values, values[1:])), values


@criterion("9b", "D=2 |z| at lambda=2 decreases across dims 11^2, 21^2, 41^2")
def test_c9b_critical_decrease(acceptance_log):
    spec = point_spec(FreeFermion(2, 2.0, 1.0), (11, 11), sizes=((11, 11), (21, 21), (41, 41)))
    values = finite_size_trend(spec).column("abs_z")
    acceptance_log(f"D=2 lambda=2 |z| at dims 11^2/21^2/41^2: {[float(v) for v in values]}")
    assert values[0] > values[1] > values[2]


# -----------------------------------------------------------------------------
# 10. D=3 gapped phase
# -----------------------------------------------------------------------------

@criterion("10", "D=3 lambda=4: gamma_g = 0 and |z| > |z(lambda=3.2)| (dims=[21,21,21])")
def test_c10_gapped_3d():
    gapped = run(FreeFermion(3, 4.0, 1.0), (21, 21, 21))
    near = run(FreeFermion(3, 3.2, 1.0), (21, 21, 21))
    assert gapped.gamma_g == 0.0
    assert gapped.abs_z > near.abs_z


# -----------------------------------------------------------------------------
# 11. Trivial twist
# -----------------------------------------------------------------------------

@criterion("11", "gamma=0 refused at parse and evaluate with the trivial-twist diagnostic")
@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("lam", [0.0, 1.0, 2.5])
def test_c11_trivial_twist(d, lam):
    with pytest.raises(ConfigError, match="trivial twist"):
        parse_config(f"model=free_fermion d={d} lambda={lam} gamma=0 dims=5")
    with pytest.raises(TrivialTwistError):
        evaluate(FreeFermion(d, lam, 0.0), build_grid([5] * d))


# -----------------------------------------------------------------------------
# 12. Unitarity sweep
# -----------------------------------------------------------------------------

@criterion("12", "every per-mode |f| <= 1 + 1e-12 and every |z| <= 1 + 1e-9")
def test_c12_unitarity():
    for c, n in random_couplings():
        assert abs(mode_factor(c, n).value) <= _FACTOR_BOUND
        assert abs(exp_factor_oracle(c, n)) <= _FACTOR_BOUND
    for model, dims in all_evaluations():
        r = run(model, dims)
        assert np.all(np.abs(r.factors) <= _FACTOR_BOUND), (model, dims)
        assert r.abs_z <= _Z_BOUND, (model, dims)
    for config in (D1_SWEEP, SSH_SWEEP):
        abs_z = sweep_table(config).column("abs_z")
        assert np.all(abs_z[np.isfinite(abs_z)] <= _Z_BOUND)


# -----------------------------------------------------------------------------
# 13. Determinism
# -----------------------------------------------------------------------------

@criterion("13", "criterion-7 sweep CSV byte-identical for workers 1, 4, 8")
def test_c13_determinism():
    spec = parse_config(D1_SWEEP)
    outputs = [emit(run_sweep(spec, workers=w)) for w in (1, 4, 8)]
    assert outputs[0] == outputs[1] == outputs[2]


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
