import numpy as np
import pytest
import scipy.sparse as sp

from liebqed import (
    LatticeSpec,
    build_lattice,
    build_network,
    single_excitation_hamiltonian,
    two_excitation_basis,
    two_excitation_hamiltonian,
    write_triplets,
)

GAMMA = 1.0
SPEC = LatticeSpec(nx=3, ny=3, gamma=GAMMA)


def _h1(spec=SPEC):
    table = build_lattice(spec)
    return table, single_excitation_hamiltonian(build_network(table), spec)


def test_single_excitation_frozen_entries():
    # chiral point k0*a = pi/2: the B->A hop at separation a picks up
    # -i(gamma/2) e^{i pi/2} = +gamma/2; A->A' at separation d gives
    # -i(gamma/2) e^{i pi} = +i gamma/2.
    table, h1 = _h1()
    a = table.index(1, 1, "A")
    b = table.index(1, 1, "B")
    a_next = table.index(2, 1, "A")
    np.testing.assert_allclose(h1[b, a], GAMMA / 2, atol=1e-15)
    np.testing.assert_allclose(h1[a, a_next], 1j * GAMMA / 2, atol=1e-15)


def test_single_excitation_diagonal():
    table, h1 = _h1()
    diag = np.diag(h1)
    for i in range(len(table)):
        expect = -1j * GAMMA if table.site(i).sublattice == "B" else -0.5j * GAMMA
        assert diag[i] == pytest.approx(expect)


def test_single_excitation_symmetric_not_hermitian():
    _, h1 = _h1()
    np.testing.assert_allclose(h1, h1.T, atol=1e-15)
    assert np.abs(h1 - h1.conj().T).max() > 0.1


def test_unconnected_pairs_vanish():
    table, h1 = _h1()
    a = table.index(0, 0, "A")
    c = table.index(0, 0, "C")
    assert h1[a, c] == 0
    assert h1[a, table.index(0, 1, "A")] == 0


def test_eigenvalues_decay_only():
    # effective Hamiltonian of a lossy system: Im(E) <= 0 for every mode
    for n in (2, 3, 4):
        _, h1 = _h1(LatticeSpec(nx=n, ny=n, gamma=GAMMA))
        lam = np.linalg.eigvals(h1)
        assert lam.imag.max() < 1e-12


def test_dark_count_matches_plaquette_count():
    for nx, ny in ((2, 2), (3, 2), (4, 3)):
        _, h1 = _h1(LatticeSpec(nx=nx, ny=ny, gamma=GAMMA))
        sv = np.linalg.svd(h1, compute_uv=False)
        n_dark = int(np.sum(sv < 1e-10 * sv[0]))
        assert n_dark == (nx - 1) * (ny - 1)


def test_basis_sizes():
    assert len(two_excitation_basis(3, "softcore").pairs) == 6
    assert len(two_excitation_basis(3, "hardcore").pairs) == 3
    assert len(two_excitation_basis(192, "softcore").pairs) == 192 * 193 // 2
    with pytest.raises(ValueError, match="statistics"):
        two_excitation_basis(4, "fermion")


def test_hardcore_excludes_double_occupancy():
    basis = two_excitation_basis(5, "hardcore")
    assert all(i < j for i, j in basis.pairs)
    soft = two_excitation_basis(5, "softcore")
    assert set(basis.pairs) == {p for p in soft.pairs if p[0] != p[1]}


def test_index_of_roundtrip():
    basis = two_excitation_basis(6, "softcore")
    for n, (i, j) in enumerate(basis.pairs):
        assert basis.index_of(i, j) == n
        assert basis.index_of(j, i) == n


def test_pack_unpack_roundtrip():
    rng = np.random.default_rng(7)
    for stats in ("softcore", "hardcore"):
        basis = two_excitation_basis(5, stats)
        psi = rng.normal(size=len(basis.pairs)) + 1j * rng.normal(size=len(basis.pairs))
        m = basis.pack(psi)
        np.testing.assert_allclose(m, m.T, atol=1e-15)
        np.testing.assert_allclose(basis.unpack(m), psi, atol=1e-14)
        # pack is an isometry up to the factor wiring: total weight match
        np.testing.assert_allclose(2 * (np.abs(m) ** 2).sum(),
                                   (np.abs(psi) ** 2).sum(), atol=1e-13)


def test_symmetrizer_isometry():
    # rows are orthonormal pair states; S S^dag = identity on the pair space
    # while S^dag S projects the site x site space onto its symmetric part
    basis = two_excitation_basis(4, "softcore")
    s = basis.symmetrizer()
    assert sp.issparse(s)
    assert s.shape == (len(basis.pairs), 16)
    np.testing.assert_allclose((s @ s.conj().T).toarray(),
                               np.eye(len(basis.pairs)), atol=1e-14)
    p = (s.conj().T @ s).toarray()
    np.testing.assert_allclose(p @ p, p, atol=1e-14)


def test_two_excitation_toy_spectrum():
    # two symmetric levels h1 = [[0, g], [g, 0]]: pair energies {-2g, 0, +2g}
    g = 0.37
    h1 = np.array([[0.0, g], [g, 0.0]])
    basis = two_excitation_basis(2, "softcore")
    h2 = two_excitation_hamiltonian(h1, LatticeSpec(nx=1, ny=1, u=0.0), basis).toarray()
    lam = np.sort(np.linalg.eigvals(h2).real)
    np.testing.assert_allclose(lam, [-2 * g, 0.0, 2 * g], atol=1e-12)


def test_kronecker_sum_oracle():
    # U=0: the two-excitation spectrum is exactly all pairwise sums of
    # single-excitation eigenvalues
    spec = LatticeSpec(nx=2, ny=2, gamma=GAMMA, u=0.0)
    _, h1 = _h1(spec)
    basis = two_excitation_basis(spec.n_sites, "softcore")
    h2 = two_excitation_hamiltonian(h1, spec, basis).toarray()
    lam1 = np.linalg.eigvals(h1)
    expect = np.array([lam1[i] + lam1[j]
                       for i in range(len(lam1)) for j in range(i, len(lam1))])
    got = np.linalg.eigvals(h2)
    key = lambda v: np.lexsort((v.imag.round(9), v.real.round(9)))
    expect, got = expect[key(expect)], got[key(got)]
    np.testing.assert_allclose(got, expect, atol=1e-10 * GAMMA)


def test_interaction_shifts_double_occupancy_only():
    u = 0.8
    spec0 = LatticeSpec(nx=2, ny=2, gamma=GAMMA, u=0.0)
    specu = LatticeSpec(nx=2, ny=2, gamma=GAMMA, u=u)
    _, h1 = _h1(spec0)
    basis = two_excitation_basis(spec0.n_sites, "softcore")
    d = (two_excitation_hamiltonian(h1, specu, basis)
         - two_excitation_hamiltonian(h1, spec0, basis)).toarray()
    expect = np.zeros(len(basis.pairs))
    for n, (i, j) in enumerate(basis.pairs):
        if i == j:
            expect[n] = u
    np.testing.assert_allclose(d, np.diag(expect), atol=1e-14)


def test_hardcore_is_softcore_restriction():
    # off-diagonal sector of the bosonic problem, double occupancy removed
    spec_h = LatticeSpec(nx=2, ny=2, gamma=GAMMA, u="hardcore")
    spec_s = LatticeSpec(nx=2, ny=2, gamma=GAMMA, u=0.0)
    _, h1 = _h1(spec_s)
    hard = two_excitation_hamiltonian(h1, spec_h,
                                      two_excitation_basis(12, "hardcore")).toarray()
    soft_basis = two_excitation_basis(12, "softcore")
    soft = two_excitation_hamiltonian(h1, spec_s, soft_basis).toarray()
    keep = [n for n, (i, j) in enumerate(soft_basis.pairs) if i != j]
    np.testing.assert_allclose(hard, soft[np.ix_(keep, keep)], atol=1e-14)


def test_statistics_mismatch_raises():
    spec = LatticeSpec(nx=2, ny=2, u="hardcore")
    _, h1 = _h1(LatticeSpec(nx=2, ny=2))
    with pytest.raises(ValueError, match="hardcore"):
        two_excitation_hamiltonian(h1, spec, two_excitation_basis(12, "softcore"))
    with pytest.raises(ValueError, match="hardcore"):
        two_excitation_hamiltonian(h1, LatticeSpec(nx=2, ny=2, u=0.0),
                                   two_excitation_basis(12, "hardcore"))


def test_h2_complex_symmetric_sparse():
    spec = LatticeSpec(nx=3, ny=2, gamma=GAMMA, u=0.3)
    _, h1 = _h1(spec)
    h2 = two_excitation_hamiltonian(h1, spec, two_excitation_basis(18, "softcore"))
    assert sp.issparse(h2)
    dev = np.abs((h2 - h2.T).toarray()).max()
    assert dev < 1e-14


def test_write_triplets(tmp_path):
    spec = LatticeSpec(nx=2, ny=2, gamma=GAMMA, u=0.1)
    _, h1 = _h1(spec)
    h2 = two_excitation_hamiltonian(h1, spec, two_excitation_basis(12, "softcore"))
    path = tmp_path / "h2.txt"
    write_triplets(h2, path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "# row col re im"
    assert len(rows) - 1 == h2.nnz
    r, c, re, im = rows[1].split()
    assert h2.tocsr()[int(r), int(c)] == pytest.approx(float(re) + 1j * float(im))
