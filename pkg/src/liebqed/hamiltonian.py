"""Effective non-Hermitian Hamiltonians in the one- and two-excitation sectors.

After integrating out the waveguide photons at resonance, emitters i, j
sharing a guide acquire the exchange term

    h_ij = -i (gamma/2) exp(i k0 |x_i - x_j|),

where |x_i - x_j| is the 1D separation along the guide.  The i = j term
gives the local decay: -i gamma/2 per guide the site touches (so A and C
sites decay at gamma, B sites at 2*gamma).  The matrix is complex
symmetric (h = h^T), not Hermitian.

The two-excitation sector uses the symmetrized bosonic basis
|ij> = b_i^+ b_j^+ |0> / sqrt(1 + delta_ij) with i <= j (softcore) or the
strictly off-diagonal pairs i < j (hardcore, two-level emitters).  The
hardcore matrix equals the bosonic one with doubly-occupied rows and
columns removed.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lattice import LatticeSpec, WaveguideNetwork

SOFTCORE = "softcore"
HARDCORE_STATS = "hardcore"


def single_excitation_hamiltonian(network: WaveguideNetwork, spec: LatticeSpec) -> np.ndarray:
    """Dense N x N effective Hamiltonian of the single-excitation sector.

    Each guide contributes -i(gamma/2) e^{i k0 r} for every ordered pair of
    its members (including i = j, which accumulates the local decay).
    """
    n = len(network.table)
    h = np.zeros((n, n), dtype=complex)
    pref = -0.5j * spec.gamma
    for g in network.waveguides:
        r = np.abs(g.coords[:, None] - g.coords[None, :])
        block = pref * np.exp(1j * spec.k0 * r)
        h[np.ix_(g.sites, g.sites)] += block
    return h


class TwoExcitationBasis:
    """Ordered pair-index map for the two-excitation sector.

    ``pairs`` lists (i, j) with i <= j (softcore) or i < j (hardcore) in
    lexicographic order; ``index_of`` inverts the map.  Dimension is
    N(N+1)/2 softcore, N(N-1)/2 hardcore.
    """

    def __init__(self, n_sites: int, statistics: str):
        if n_sites < 2:
            raise ValueError(f"need at least 2 sites, got {n_sites}")
        if statistics not in (SOFTCORE, HARDCORE_STATS):
            raise ValueError(f"unknown statistics {statistics!r}")
        self.n_sites = n_sites
        self.statistics = statistics
        diag = statistics == SOFTCORE
        pairs = []
        lookup = np.full((n_sites, n_sites), -1, dtype=np.int64)
        for i in range(n_sites):
            for j in range(i if diag else i + 1, n_sites):
                lookup[i, j] = lookup[j, i] = len(pairs)
                pairs.append((i, j))
        self.pairs = pairs
        self._lookup = lookup
        self.i_idx = np.array([p[0] for p in pairs])
        self.j_idx = np.array([p[1] for p in pairs])

    def __len__(self):
        return len(self.pairs)

    def index_of(self, i: int, j: int) -> int:
        k = self._lookup[i, j]
        if k < 0:
            raise KeyError(f"pair ({i}, {j}) not in {self.statistics} basis")
        return int(k)

    def symmetrizer(self) -> sp.csr_matrix:
        """Isometry S from the pair basis into the N^2 tensor space.

        Row for pair (i < j) has 1/sqrt(2) at tensor columns i*N+j and
        j*N+i; a softcore row (i, i) has 1 at i*N+i.  S S^T = identity.
        """
        n = self.n_sites
        rows, cols, vals = [], [], []
        for k, (i, j) in enumerate(self.pairs):
            if i == j:
                rows.append(k)
                cols.append(i * n + i)
                vals.append(1.0)
            else:
                rows.extend((k, k))
                cols.extend((i * n + j, j * n + i))
                vals.extend((np.sqrt(0.5), np.sqrt(0.5)))
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self), n * n))

    def pack(self, psi: np.ndarray) -> np.ndarray:
        """Pair-basis vector -> symmetric N x N amplitude matrix.

        The matrix Psi satisfies <psi|psi> = 2 sum_ij |Psi_ij|^2 and
        represents |psi> = sum_ij Psi_ij |i>|j> in the tensor space.
        """
        n = self.n_sites
        m = np.zeros((n, n), dtype=complex)
        i, j = self.i_idx, self.j_idx
        off = i != j
        m[i[off], j[off]] = 0.5 * psi[off]
        m[j[off], i[off]] = 0.5 * psi[off]
        if self.statistics == SOFTCORE:
            dg = ~off
            m[i[dg], i[dg]] = psi[dg] / np.sqrt(2.0)
        return m

    def unpack(self, m: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`pack` (symmetric part of ``m`` is assumed)."""
        psi = np.empty(len(self), dtype=complex)
        i, j = self.i_idx, self.j_idx
        off = i != j
        psi[off] = m[i[off], j[off]] + m[j[off], i[off]]
        if self.statistics == SOFTCORE:
            dg = ~off
            psi[dg] = np.sqrt(2.0) * m[i[dg], i[dg]]
        return psi


def two_excitation_basis(n_sites: int, statistics: str) -> TwoExcitationBasis:
    return TwoExcitationBasis(n_sites, statistics)


def two_excitation_hamiltonian(h1: np.ndarray, spec: LatticeSpec,
                               basis: TwoExcitationBasis) -> sp.csr_matrix:
    """Sparse two-excitation Hamiltonian S (h x I + I x h) S^T (+ U on diagonal pairs).

    ``S`` is the symmetrization isometry of ``basis``; the interaction adds
    ``spec.u`` to every doubly-occupied softcore pair.  Hardcore statistics
    require ``spec.u == "hardcore"`` and carry no interaction term.
    """
    if basis.statistics == HARDCORE_STATS and not spec.hardcore:
        raise ValueError("hardcore basis requires spec.u == 'hardcore'")
    if basis.statistics == SOFTCORE and spec.hardcore:
        raise ValueError("softcore basis is incompatible with spec.u == 'hardcore'")
    n = basis.n_sites
    if h1.shape != (n, n):
        raise ValueError(f"h1 shape {h1.shape} does not match basis on {n} sites")
    hs = sp.csr_matrix(h1)
    hs.eliminate_zeros()
    eye = sp.identity(n, format="csr")
    free = sp.kron(hs, eye, format="csr") + sp.kron(eye, hs, format="csr")
    s = basis.symmetrizer()
    h2 = (s @ free @ s.T).tocsr()
    if basis.statistics == SOFTCORE and spec.u:
        dg = np.flatnonzero(basis.i_idx == basis.j_idx)
        h2 = (h2 + sp.csr_matrix((np.full(len(dg), float(spec.u)), (dg, dg)),
                                 shape=h2.shape)).tocsr()
    h2.sum_duplicates()
    return h2


def write_triplets(matrix, path):
    """Export a (sparse or dense) matrix as 'row col re im' text lines."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# row col re im\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
