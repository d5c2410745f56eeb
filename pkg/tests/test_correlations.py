import math

import numpy as np
import pytest

from bundlesim.correlations import (
    detuning_scan,
    gn,
    mean_occupation,
    phonon_populations,
    resonance_map,
)
from bundlesim.dynamics import steady_state
from bundlesim.errors import UndefinedCorrelation
from bundlesim.model import SystemParams, jump_channels, rotating_hamiltonian
from bundlesim.operators import HilbertConfig, tensor_basis_state

# steady-state scan working point: weak coupling, weak drive, all three
# dissipation channels on
P_SCAN = SystemParams(lam=0.03, omega_drive=0.003, kappa=0.002, gamma=2e-4, gamma_phi=4e-4)


def _phonon_density(h, pops_phonon, qd="v"):
    """Joint density with the given phonon distribution on one emitter block."""
    rho = np.zeros((h.dim_total, h.dim_total), dtype=complex)
    start = 0 if qd == "v" else h.dim_phonon
    rho[start : start + h.dim_phonon, start : start + h.dim_phonon] = np.diag(pops_phonon)
    return rho


def test_phonon_populations_sums_blocks():
    h = HilbertConfig(n_max=2)
    rho = np.zeros((h.dim_total, h.dim_total), dtype=complex)
    rho[h.index(1, "v"), h.index(1, "v")] = 0.25
    rho[h.index(1, "c"), h.index(1, "c")] = 0.25
    rho[h.index(0, "c"), h.index(0, "c")] = 0.5
    np.testing.assert_allclose(phonon_populations(h, rho), [0.5, 0.5, 0.0], atol=1e-15)
    assert mean_occupation(h, rho) == pytest.approx(0.5)


def test_gn_coherent_state():
    # Poissonian statistics: g^(n) = 1 for every order
    h = HilbertConfig(n_max=20)
    alpha = 0.6
    levels = np.arange(h.dim_phonon)
    pops = np.exp(-(alpha**2)) * alpha ** (2 * levels) / np.array(
        [math.factorial(int(k)) for k in levels], dtype=float
    )
    rho = _phonon_density(h, pops)
    for order in (2, 3, 4):
        assert gn(h, rho, order) == pytest.approx(1.0, abs=1e-6)


def test_gn_fock_two():
    h = HilbertConfig(n_max=6)
    psi = tensor_basis_state(h, 2, "v")
    rho = np.outer(psi, psi.conj())
    # n(n-1)/n^2 = 2/4
    assert gn(h, rho, 2) == pytest.approx(0.5, abs=1e-14)
    assert gn(h, rho, 3) == pytest.approx(0.0, abs=1e-14)


def test_gn_thermal_state():
    h = HilbertConfig(n_max=30)
    nbar = 0.5
    levels = np.arange(h.dim_phonon)
    pops = (nbar / (1 + nbar)) ** levels / (1 + nbar)
    rho = _phonon_density(h, pops, qd="c")
    assert mean_occupation(h, rho) == pytest.approx(nbar, abs=1e-8)
    assert gn(h, rho, 2) == pytest.approx(2.0, abs=1e-4)
    assert gn(h, rho, 3) == pytest.approx(6.0, abs=1e-3)


def test_gn_undefined_on_vacuum():
    h = HilbertConfig(n_max=3)
    psi = tensor_basis_state(h, 0, "v")
    with pytest.raises(UndefinedCorrelation):
        gn(h, np.outer(psi, psi.conj()), 2)
    with pytest.raises(ValueError):
        gn(h, np.outer(psi, psi.conj()), 0)


def test_scan_matches_single_point_solves():
    h = HilbertConfig(n_max=9)
    deltas = np.array([-2.01, -2.0, -1.99])
    scan = detuning_scan(P_SCAN, h, deltas, orders=(2, 3))
    assert scan.errors == []
    assert scan.gvalues.shape == (3, 2)
    for k, delta in enumerate(deltas):
        p = SystemParams(
            delta=float(delta), lam=0.03, omega_drive=0.003, kappa=0.002, gamma=2e-4, gamma_phi=4e-4
        )
        rho = steady_state(h, rotating_hamiltonian(p, h), jump_channels(p, h))
        assert scan.nb[k] == pytest.approx(mean_occupation(h, rho), rel=1e-12)
        assert scan.gvalues[k, 0] == pytest.approx(gn(h, rho, 2), rel=1e-12)
        assert scan.gvalues[k, 1] == pytest.approx(gn(h, rho, 3), rel=1e-12)


def test_scan_frozen_point_on_two_phonon_resonance():
    # regression pin for the steady state at delta = -2 exactly
    h = HilbertConfig(n_max=9)
    scan = detuning_scan(P_SCAN, h, np.array([-2.0]), orders=(2,))
    assert scan.nb[0] == pytest.approx(2.7553720227180767e-06, rel=1e-6)
    assert scan.gvalues[0, 0] == pytest.approx(181116.316483221, rel=1e-6)


def test_scan_deterministic_and_worker_independent():
    h = HilbertConfig(n_max=7)
    deltas = np.linspace(-2.05, -1.95, 5)
    first = detuning_scan(P_SCAN, h, deltas, orders=(2,))
    second = detuning_scan(P_SCAN, h, deltas, orders=(2,))
    np.testing.assert_array_equal(first.nb, second.nb)
    np.testing.assert_array_equal(first.gvalues, second.gvalues)
    fanned = detuning_scan(P_SCAN, h, deltas, orders=(2,), workers=2)
    np.testing.assert_array_equal(first.nb, fanned.nb)
    np.testing.assert_array_equal(first.gvalues, fanned.gvalues)


def test_scan_records_errors_and_continues():
    # with the drive off the steady state is the vacuum, so g^(2) is
    # undefined at every point; the scan must finish anyway, recording
    # one error per point and writing NaN for the correlation
    p = SystemParams(lam=0.03, omega_drive=0.0, kappa=0.002, gamma=2e-4)
    h = HilbertConfig(n_max=7)
    deltas = np.array([-2.0, -1.9])
    scan = detuning_scan(p, h, deltas, orders=(2,))
    np.testing.assert_allclose(scan.nb, 0.0, atol=1e-15)
    assert np.all(np.isnan(scan.gvalues))
    assert len(scan.errors) == 2
    assert all(kind == "UndefinedCorrelation" for _, kind, _ in scan.errors)


def test_resonance_map_ridge_tracks_polaron_shift():
    h = HilbertConfig(n_max=9)
    lam_values = np.array([0.05, 0.1])
    deltas = np.arange(-2.004, -1.9835, 0.002)
    result = resonance_map(
        P_SCAN, h, "lam", lam_values, deltas, order=2, regime_reference="strong_coupling"
    )
    assert result.g2.shape == (2, deltas.size)
    step = deltas[1] - deltas[0]
    for i, lam in enumerate(lam_values):
        assert result.ridge_analytic[i] == pytest.approx(lam**2 - 2.0, abs=1e-12)
        assert abs(result.ridge_deltas[i] - result.ridge_analytic[i]) <= step + 1e-12


def test_resonance_map_axis_validation():
    h = HilbertConfig(n_max=4)
    with pytest.raises(ValueError):
        resonance_map(P_SCAN, h, "kappa", np.array([0.1]), np.array([-2.0, -1.9]))
