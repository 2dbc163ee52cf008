import numpy as np
import pytest

from liebqed import (
    LatticeSpec,
    NumericalError,
    band_gap,
    band_structure,
    bloch_hamiltonian,
    chiral_coupling,
    dispersive_energy,
    epsilon_1d,
    refine_band_minimum,
    shifted_k_grid,
)

CHIRAL = LatticeSpec(nx=2, ny=2)                      # k0*d = pi, a = d/2
HALFPI = LatticeSpec(nx=2, ny=2, k0=np.pi / 2)        # k0*d = pi/2
GENERIC = LatticeSpec(nx=2, ny=2, k0=0.7 * np.pi)


def test_epsilon_1d_chiral_vanishes():
    # same-sublattice coherent coupling is suppressed at k0*d = pi
    k = np.linspace(-3, 3, 41)
    np.testing.assert_allclose(epsilon_1d(k, CHIRAL), 0.0, atol=1e-14)


def test_epsilon_1d_frozen_value():
    assert epsilon_1d(0.0, HALFPI) == pytest.approx(0.5, abs=1e-12)


def test_epsilon_1d_superradiant_pole():
    with pytest.raises(NumericalError, match="superradiant"):
        epsilon_1d(HALFPI.k0, HALFPI)


def test_chiral_coupling_values():
    t0 = chiral_coupling(0.0, CHIRAL)
    assert t0 == pytest.approx(0.5)
    k = np.array([0.0, 0.8, -0.8])
    t = chiral_coupling(k, CHIRAL)
    # t(-k) = conj(t(k)); magnitude grows away from the zone center
    assert t[2] == pytest.approx(np.conj(t[1]))
    np.testing.assert_allclose(t.real, 0.5)


def test_chiral_coupling_corner_pole():
    with pytest.raises(NumericalError):
        chiral_coupling(np.pi / CHIRAL.d, CHIRAL)


def test_bloch_hamiltonian_hermitian():
    for spec in (CHIRAL, GENERIC):
        h = bloch_hamiltonian(0.37, -1.1, spec)
        np.testing.assert_allclose(h, h.conj().T, atol=1e-14)


def test_bloch_gamma_point_spectrum():
    lam = np.linalg.eigvalsh(bloch_hamiltonian(0.0, 0.0, CHIRAL))
    np.testing.assert_allclose(lam, [-1 / np.sqrt(2), 0.0, 1 / np.sqrt(2)],
                               atol=1e-14)


def test_bloch_matches_chiral_coupling():
    # at the chiral point the B row is exactly the two guide couplings
    kx, ky = 0.41, -0.93
    h = bloch_hamiltonian(kx, ky, CHIRAL)
    assert h[1, 1] == 0
    assert abs(h[0, 1]) == pytest.approx(abs(chiral_coupling(kx, CHIRAL)))
    assert abs(h[0, 2]) == pytest.approx(abs(chiral_coupling(ky, CHIRAL)))


def test_dispersive_energy_matches_eigh():
    rng = np.random.default_rng(11)
    for kx, ky in rng.uniform(-2.5, 2.5, size=(20, 2)):
        lam = np.linalg.eigvalsh(bloch_hamiltonian(kx, ky, CHIRAL))
        assert dispersive_energy(kx, ky, CHIRAL) == pytest.approx(lam[2], abs=1e-12)


def test_shifted_grid_avoids_high_symmetry_points():
    for n in (4, 16, 64):
        ks = shifted_k_grid(n, CHIRAL)
        assert ks.shape == (n, )
        assert np.abs(ks).min() > 0          # never Gamma
        assert np.abs(np.abs(ks) - np.pi / CHIRAL.d).min() > 1e-12  # never the edge
        # symmetric set: k and -k both present
        np.testing.assert_allclose(np.sort(ks), -np.sort(-ks)[::-1] * 1.0)
        np.testing.assert_allclose(sorted(ks), sorted(-k for k in ks), atol=1e-14)


def test_band_structure_shapes_and_order():
    bs = band_structure(8, CHIRAL)
    assert bs.k_grid.shape == (64, 2)
    assert bs.energies.shape == (64, 3)
    assert bs.eigenvectors.shape == (64, 3, 3)
    assert np.all(np.diff(bs.energies, axis=1) >= 0)


def test_flat_band_exactly_flat():
    bs = band_structure(16, CHIRAL)
    assert np.abs(bs.energies[:, 1]).max() < 1e-13


def test_band_symmetry():
    # chiral symmetry pairs the dispersive bands: e1 = -e3
    bs = band_structure(12, CHIRAL)
    np.testing.assert_allclose(bs.energies[:, 0], -bs.energies[:, 2], atol=1e-13)


def test_eigenvectors_diagonalize():
    bs = band_structure(6, CHIRAL)
    for n in range(0, 36, 7):
        kx, ky = bs.k_grid[n]
        h = bloch_hamiltonian(kx, ky, CHIRAL)
        for band in range(3):
            v = bs.eigenvectors[n, :, band]
            resid = h @ v - bs.energies[n, band] * v
            assert np.linalg.norm(resid) < 1e-12


def test_band_gap_formula():
    assert band_gap(CHIRAL) == pytest.approx(1 / np.sqrt(2))
    spec = LatticeSpec(nx=2, ny=2, gamma=2.5)
    assert band_gap(spec) == pytest.approx(2.5 / np.sqrt(2))
    # a != d/2 reduces |sin(k0 a)| below 1
    skew = LatticeSpec(nx=2, ny=2, a=0.25)
    assert band_gap(skew) == pytest.approx(np.sin(0.25 * np.pi) / np.sqrt(2))


def test_refined_minimum_beats_grid():
    # the shifted grid misses Gamma, so its minimum sits above the true gap
    bs = band_structure(64, CHIRAL)
    grid_min = bs.energies[:, 2].min()
    k_start = bs.k_grid[np.argmin(bs.energies[:, 2])]
    k_min, e_min = refine_band_minimum(CHIRAL, k_start)
    true_gap = band_gap(CHIRAL)
    assert grid_min - true_gap > 1e-5
    assert abs(e_min - true_gap) < 1e-9
    assert np.linalg.norm(k_min) < 1e-3
