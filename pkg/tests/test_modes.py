import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import mhz
from zigzag.core import DomainError
from zigzag.crystal import (Configuration, CrystalState, TrapPotential, critical_anisotropy,
                            find_equilibrium, linear_chain, potential_energy)
from zigzag.modes import (InstabilityError, classify_modes, hessian, normal_modes, soft_mode,
                          soft_mode_curve)


def fd_hessian(positions, trap, h):
    """Central second differences of the energy."""
    flat = positions.ravel()
    n = flat.size
    out = np.zeros((n, n))

    def e(v):
        return potential_energy(v.reshape(-1, 3), trap)

    for i in range(n):
        for j in range(i, n):
            pp, pm, mp, mm = (flat.copy() for _ in range(4))
            pp[i] += h; pp[j] += h
            pm[i] += h; pm[j] -= h
            mp[i] -= h; mp[j] += h
            mm[i] -= h; mm[j] -= h
            out[i, j] = out[j, i] = (e(pp) - e(pm) - e(mp) + e(mm)) / (4 * h * h)
    return out


def chain_state(trap, n):
    pos = np.zeros((n, 3))
    pos[:, 2] = linear_chain(n) * trap.length
    return CrystalState(pos, potential_energy(pos, trap), Configuration.LINEAR, True, 0.0, trap)


def test_single_ion_hessian_and_modes():
    trap = TrapPotential(mhz(1.7), mhz(2.9), mhz(0.89))
    state = find_equilibrium(trap, 1)
    m = trap.species.mass
    assert np.allclose(hessian(state), np.diag(m * np.array([trap.omega_x, trap.omega_y, trap.omega_z]) ** 2),
                       rtol=1e-14, atol=0)
    spec = normal_modes(state)
    assert np.allclose(spec.frequencies, sorted([trap.omega_x, trap.omega_y, trap.omega_z]), rtol=1e-14)


def test_two_ion_axial_block_against_finite_differences():
    trap = TrapPotential(mhz(1.7), mhz(2.9), mhz(0.89))
    state = find_equilibrium(trap, 2)
    m, wz = trap.species.mass, trap.omega_z
    numeric = fd_hessian(state.positions, trap, h=1e-3 * trap.length)
    axial = numeric[np.ix_([2, 5], [2, 5])]
    lam = np.linalg.eigvalsh(axial) / (m * wz**2)
    assert np.allclose(lam, [1, 3], rtol=1e-5)
    assert np.allclose(hessian(state), numeric, rtol=1e-5, atol=1e-5 * np.max(np.abs(numeric)))


def test_three_ion_linear_chain_modes():
    trap = TrapPotential.from_alpha(mhz(1.75), 0.31, mhz(2.9))
    spec = normal_modes(find_equilibrium(trap, 3))
    wx, wz = trap.omega_x, trap.omega_z
    weights = spec.axis_weights()
    axial = np.sort(spec.frequencies[weights[:, 2] > 0.5])
    radial_x = np.sort(spec.frequencies[weights[:, 0] > 0.5])
    assert np.allclose(axial, wz * np.sqrt([1, 3, 29 / 5]), rtol=1e-9)
    assert np.allclose(radial_x, np.sqrt([wx**2 - 12 / 5 * wz**2, wx**2 - wz**2, wx**2]), rtol=1e-9)


def test_three_ion_radial_eigenvectors():
    trap = TrapPotential.from_alpha(mhz(1.75), 0.31, mhz(2.9))
    spec = normal_modes(find_equilibrium(trap, 3))
    x_modes = [k for k in range(9) if spec.axis_weights()[k, 0] > 0.5]
    got = {round(spec.frequencies[k] / trap.omega_x, 6): spec.vectors(k)[:, 0] for k in x_modes}
    expected = [np.array([1, 1, 1]) / math.sqrt(3), np.array([1, 0, -1]) / math.sqrt(2),
                np.array([1, -2, 1]) / math.sqrt(6)]
    for (_, v), e in zip(sorted(got.items(), reverse=True), expected):
        assert np.allclose(v, e, atol=1e-6) or np.allclose(v, -e, atol=1e-6)


@pytest.mark.parametrize("n,alpha", [(2, 0.3), (3, 0.31), (3, 0.42), (4, 0.5), (5, 0.3)])
def test_mode_invariants(n, alpha):
    trap = TrapPotential.from_alpha(mhz(1.7), alpha, mhz(2.9))
    state = find_equilibrium(trap, n)
    spec = normal_modes(state)
    v = spec.eigenvectors
    assert np.max(np.abs(v @ v.T - np.eye(3 * n))) < 1e-10
    h = hessian(state) / trap.species.mass
    for k in range(3 * n):
        lam = spec.frequencies[k] ** 2
        assert np.linalg.norm(h @ v[k] - lam * v[k]) / (lam * np.linalg.norm(v[k])) < 1e-10
    assert math.isclose(np.sum(spec.frequencies**2), np.trace(h), rel_tol=1e-10)
    # Coulomb part of the trace vanishes: sum rule reduces to the bare trap
    assert math.isclose(np.trace(h), n * (trap.omega_x**2 + trap.omega_y**2 + trap.omega_z**2),
                        rel_tol=1e-10)
    assert np.all(np.diff(spec.frequencies) >= 0)


@given(st.integers(1, 5), st.floats(0.05, 0.6))
def test_one_com_mode_per_axis_at_trap_frequency(n, alpha):
    trap = TrapPotential.from_alpha(mhz(1.7), alpha, mhz(2.9))
    spec = normal_modes(find_equilibrium(trap, n))
    labels = classify_modes(spec, range(n))
    for axis, w in zip("xyz", (trap.omega_x, trap.omega_y, trap.omega_z)):
        com = [lb for lb in labels if lb.rank == "com" and lb.axis == axis]
        assert len(com) == 1
        assert math.isclose(com[0].frequency, w, rel_tol=1e-9)


def test_sign_convention_first_largest_entry_positive(planar_trap):
    spec = normal_modes(find_equilibrium(planar_trap, 4))
    for v in spec.eigenvectors:
        mag = np.abs(v)
        first = np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0]
        assert v[first] > 0


def test_instability_error_names_direction():
    trap = TrapPotential.from_alpha(mhz(1.75), 0.45, mhz(2.9))
    with pytest.raises(InstabilityError, match="along x"):
        normal_modes(chain_state(trap, 3))


def test_soft_mode_linear_side_formula():
    wx = mhz(1.75)
    trap = TrapPotential.from_alpha(wx, 0.3, mhz(2.9))
    curve = soft_mode_curve(trap, 3, [0.01, 0.2, 0.35, 0.40])
    for p in curve:
        assert math.isclose(p.omega_soft, wx * math.sqrt(1 - 12 / 5 * p.alpha), rel_tol=1e-8)
    assert abs(curve[0].omega_soft - wx) < 0.02 * wx


def test_soft_mode_values_at_reference_settings():
    trap = TrapPotential.from_alpha(mhz(1.75), 0.3, mhz(2.9))
    at40, at42 = soft_mode_curve(trap, 3, [0.40, 0.42])
    assert abs(at40.omega_soft / mhz(0.350) - 1) < 0.01
    assert abs(at42.omega_soft / mhz(0.225) - 1) < 0.10
    assert at42.configuration is Configuration.ZIGZAG


def test_soft_mode_vanishes_at_critical_point():
    trap = TrapPotential.from_alpha(mhz(1.75), 0.3, mhz(2.9))
    crit = critical_anisotropy(trap, 3).alpha_crit
    below = soft_mode_curve(trap, 3, [crit * (1 - 1e-5)])[0]
    assert below.omega_soft < 0.01 * trap.omega_x


def test_soft_mode_curve_flags_bad_points():
    trap = TrapPotential.from_alpha(mhz(1.75), 0.3, mhz(2.9))
    bad = soft_mode_curve(trap, 3, [1.2])[0]
    assert math.isnan(bad.omega_soft) and bad.flag


def test_four_ion_selection_rules(planar_trap):
    spec = normal_modes(find_equilibrium(planar_trap, 4))
    labels = {lb.name: lb for lb in classify_modes(spec, [0, 3], (1, 0.05, 0))}
    assert len(labels) == 12
    for name in ("x-com", "x2", "x3"):
        assert all(labels[name].visible), name
    assert not any(labels["x1"].visible)
    assert not any(labels["y3"].visible)


def test_com_mode_visible_on_every_ion(three_ion_trap):
    spec = normal_modes(find_equilibrium(three_ion_trap, 3))
    com = [lb for lb in classify_modes(spec, range(3)) if lb.name == "x-com"]
    assert com and all(com[0].visible)


def test_empty_roi_rejected(three_ion_trap):
    spec = normal_modes(find_equilibrium(three_ion_trap, 3))
    with pytest.raises(DomainError):
        classify_modes(spec, [])


def test_soft_mode_helper(three_ion_trap):
    spec = normal_modes(find_equilibrium(three_ion_trap, 3))
    assert soft_mode(spec) == spec.frequencies[0]
