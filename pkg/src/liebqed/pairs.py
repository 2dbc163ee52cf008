"""Two-excitation theory inside the isolated flat band.

With both excitations restricted to the flat band, the only dynamics left
comes from the on-site interaction projected onto flat-band pair states

    |K, q> = f^+_{K/2+q} f^+_{K/2-q} |0>,

where f^+_k creates a flat-band Bloch excitation and K is the conserved
center-of-mass momentum.  The labels (K, q) and (K, -q) denote the same
state, so the physical basis keeps one representative per +-q pair (the
half-step-shifted momentum grid has no self-paired q).  The projected
interaction is the rank-<=2 positive matrix

    V_{q'q}(K) = (2U/Nc) sum_{beta in {A,C}} conj(w_beta(q')) w_beta(q),
    w_beta(q)  = v_beta(K/2+q) v_beta(K/2-q),

with v the flat-band Bloch vector in the gauge v(-k) = conj(v(k)) and Nc
the number of unit cells of the momentum grid.  (Writing the quadruple
product with unconjugated coefficients at negated momenta gives the same
matrix in this gauge; the 2/Nc prefactor is the Fourier normalization of
the on-site interaction and makes these energies directly comparable to
the projected interaction on a finite lattice.)  Eigenvectors with zero
eigenvalue are dark two-excitation states; the two nonzero branches are
interaction-induced dispersive bound pairs.

The same construction on the open lattice replaces Bloch states by the
flat-band kernel: classify_flatband_eigenstates diagonalizes the projected
on-site interaction within the kernel-pair subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .flatband import FlatbandPairProjector
from .hamiltonian import SOFTCORE, TwoExcitationBasis
from .lattice import LatticeSpec

_CORNER_TOL = 1e-12


def flatband_bloch_vector(k, spec: LatticeSpec) -> np.ndarray:
    """Flat-band Bloch vector at k = (kx, ky), ordering (B, A, C).

    Uses the pole-free normalization
        v = (0, -cos(kx d/2) e^{i ky d/2}, cos(ky d/2) e^{i kx d/2}) / sqrt(cx^2+cy^2),
    which is finite on the whole zone except the corner |kx|=|ky|=pi/d,
    equals the coupling-ratio form up to a momentum-even sign, and obeys
    v(-k) = conj(v(k)) by construction.
    """
    spec.require_chiral()
    kx, ky = float(k[0]), float(k[1])
    cx = math.cos(kx * spec.d / 2)
    cy = math.cos(ky * spec.d / 2)
    nrm = math.hypot(cx, cy)
    if nrm < _CORNER_TOL:
        raise NumericalError("flat-band vector undefined at the Brillouin-zone corner")
    return np.array([0.0,
                     -cx * np.exp(0.5j * ky * spec.d),
                     cy * np.exp(0.5j * kx * spec.d)]) / nrm


def _fb_components(kx, ky, spec: LatticeSpec):
    """Vectorized (v_A, v_C) of flatband_bloch_vector; raises on corner hits."""
    cx = np.cos(np.asarray(kx) * spec.d / 2)
    cy = np.cos(np.asarray(ky) * spec.d / 2)
    nrm = np.hypot(cx, cy)
    if np.any(nrm < _CORNER_TOL):
        raise NumericalError("flat-band vector undefined at the Brillouin-zone corner")
    va = -cx * np.exp(0.5j * np.asarray(ky) * spec.d) / nrm
    vc = cy * np.exp(0.5j * np.asarray(kx) * spec.d) / nrm
    return va, vc


@dataclass(frozen=True)
class PairBasis:
    """Exchange-deduplicated relative-momentum basis at fixed K."""
    grid_size: int
    q_full: np.ndarray      # (L^2, 2) all shifted-grid momenta
    rep_idx: np.ndarray     # indices into q_full of the kept representatives
    partner: np.ndarray     # for each full index, the index of -q

    @property
    def q(self) -> np.ndarray:
        return self.q_full[self.rep_idx]

    def __len__(self):
        return len(self.rep_idx)


def pair_basis(grid_size: int, spec: LatticeSpec) -> PairBasis:
    """Half of the shifted grid_size^2 momentum grid (one q per {q, -q})."""
    if grid_size % 2:
        raise ValueError("grid_size must be even so that q and -q never coincide")
    ks = (2 * np.arange(grid_size) + 1 - grid_size) * math.pi / (grid_size * spec.d)
    kxg, kyg = np.meshgrid(ks, ks, indexing="ij")
    q_full = np.column_stack([kxg.ravel(), kyg.ravel()])
    n = np.arange(grid_size ** 2)
    ix, iy = n // grid_size, n % grid_size
    partner = (grid_size - 1 - ix) * grid_size + (grid_size - 1 - iy)
    rep_idx = n[n < partner]
    return PairBasis(grid_size, q_full, rep_idx, partner)


def _w_factors(K, basis: PairBasis, spec: LatticeSpec, drop_singular=False):
    """w_beta(q) = v_beta(K/2+q) v_beta(K/2-q) on the representative grid.

    Returns (w, keep_mask) with w of shape (2, n_kept), rows (A, C).  With
    drop_singular, representatives whose momenta hit the zone corner are
    removed instead of raising.
    """
    q = basis.q
    kp = 0.5 * np.asarray(K) + q
    km = 0.5 * np.asarray(K) - q
    keep = np.ones(len(q), dtype=bool)
    if drop_singular:
        for pts in (kp, km):
            cx = np.cos(pts[:, 0] * spec.d / 2)
            cy = np.cos(pts[:, 1] * spec.d / 2)
            keep &= np.hypot(cx, cy) >= _CORNER_TOL
    vap, vcp = _fb_components(kp[keep, 0], kp[keep, 1], spec)
    vam, vcm = _fb_components(km[keep, 0], km[keep, 1], spec)
    return np.vstack([vap * vam, vcp * vcm]), keep


def interaction_matrix(K, basis: PairBasis, u: float, spec: LatticeSpec,
                       drop_singular=False) -> np.ndarray:
    """Projected on-site interaction V(K) on the deduplicated pair basis.

    Hermitian and positive semidefinite with rank <= 2 by construction;
    Hermiticity is still asserted at runtime since it is the observable
    consequence of the v(-k) = conj(v(k)) gauge.
    """
    w, keep = _w_factors(K, basis, spec, drop_singular)
    nc = basis.grid_size ** 2
    v = (2.0 * u / nc) * (w.conj().T @ w)
    dev = float(np.abs(v - v.conj().T).max())
    if dev > 1e-10 * max(float(np.abs(v).max()), 1e-300):
        raise NumericalError(
            f"projected interaction non-Hermitian (dev {dev:.3e}); gauge violation")
    return v


def branch_energies(K, basis: PairBasis, u: float, spec: LatticeSpec) -> np.ndarray:
    """The two nonzero eigenvalues of V(K) from the 2x2 overlap of w_A, w_C.

    Cheap closed route for the dispersive bound-pair branches; the zero
    eigenvalues carry the remaining basis-size - 2 dark states.
    """
    w, _ = _w_factors(K, basis, spec)
    nc = basis.grid_size ** 2
    overlap = (2.0 * u / nc) * (w @ w.conj().T)
    return np.sort(np.linalg.eigvalsh(overlap))


@dataclass
class PairSpectrum:
    k_points: np.ndarray               # (n_K, 2)
    eigenvalues: list = field(repr=False)   # per K, ascending real array
    dark_counts: np.ndarray = None
    upper: np.ndarray = None
    lower: np.ndarray = None
    flags: list = None


def pair_spectrum(k_points, basis: PairBasis, u: float, spec: LatticeSpec,
                  dark_tol: float = 1e-10, ambiguity_tol: float = 1e-6,
                  drop_singular: bool = False) -> PairSpectrum:
    """Eigen-decomposition of V(K) at each K with branch/dark bookkeeping.

    Dark states are eigenvalues below dark_tol * max|E| at that K; a third
    eigenvalue within ambiguity_tol * u of the second is flagged (branch
    extraction ambiguous), not raised.  With drop_singular, relative momenta
    that land on a superradiant divergence at some K (possible for K off the
    shifted grid) are excluded from that K's basis instead of raising.
    """
    k_points = np.atleast_2d(np.asarray(k_points, dtype=float))
    eigenvalues, dark, upper, lower, flags = [], [], [], [], []
    for kk in k_points:
        ev = np.linalg.eigvalsh(interaction_matrix(kk, basis, u, spec,
                                                   drop_singular=drop_singular))
        scale = max(ev[-1], 1e-300)
        eigenvalues.append(ev)
        dark.append(int(np.sum(np.abs(ev) < dark_tol * scale)))
        upper.append(ev[-1])
        lower.append(ev[-2])
        if len(ev) > 2 and u > 0 and abs(ev[-3]) > ambiguity_tol * u:
            flags.append((tuple(kk), f"third eigenvalue {ev[-3]:.3e} not well separated"))
    return PairSpectrum(k_points, eigenvalues, np.array(dark), np.array(upper),
                        np.array(lower), flags)


def relative_population(K, branch: str, basis: PairBasis, spec: LatticeSpec,
                        ref_sublattice: str = "A", u: float = 1.0):
    """Conditional distribution of the second excitation for a bound branch.

    Given one excitation on the ``ref_sublattice`` site of the origin cell,
    returns the probability of finding the partner on sublattice beta' of
    the cell at relative separation (dx, dy), as
    {"cells": (L,) int offsets, "by_sublattice": {beta: (L, L) array},
    "cell_map": (L, L) array}, row/col order matching ``cells``.  The
    distribution is independent of u; ``branch_energy`` is reported at u.
    """
    if branch not in ("upper", "lower"):
        raise ValueError(f"branch must be 'upper' or 'lower', got {branch!r}")
    if ref_sublattice not in ("A", "C"):
        raise ValueError("reference site must lie on a flat-band sublattice (A or C)")
    ell = basis.grid_size
    nc = ell ** 2
    vmat = interaction_matrix(K, basis, u, spec)
    ev, vec = np.linalg.eigh(vmat)
    c_rep = vec[:, -1 if branch == "upper" else -2]
    # spread representatives back over the full +-q grid
    c_full = np.zeros(nc, dtype=complex)
    c_full[basis.rep_idx] = c_rep
    c_full[basis.partner[basis.rep_idx]] = c_rep
    kp = 0.5 * np.asarray(K) + basis.q_full
    km = 0.5 * np.asarray(K) - basis.q_full
    vap, vcp = _fb_components(kp[:, 0], kp[:, 1], spec)
    vam, vcm = _fb_components(km[:, 0], km[:, 1], spec)
    plus = {"A": vap, "C": vcp}
    minus = {"A": vam, "C": vcm}
    ref = plus[ref_sublattice]
    # relative-cell amplitude by FFT over the shifted grid (phase-corrected)
    r = np.arange(ell)
    shift_phase = np.exp(-1j * math.pi * (1 - ell) * r / ell)
    phase2d = np.outer(shift_phase, shift_phase)
    weights = {}
    for beta in ("A", "C"):
        x = (c_full * ref * minus[beta]).reshape(ell, ell)
        phi = np.fft.fft2(x) * phase2d / (2 * nc)
        w = 4 * np.abs(phi) ** 2
        weights[beta] = w
    # double occupancy of the reference site interferes with exchange: halve it
    weights[ref_sublattice][0, 0] *= 0.5
    total = sum(w.sum() for w in weights.values())
    offsets = np.where(r < ell // 2 + ell % 2, r, r - ell)
    cell_map = sum(weights.values())
    return {
        "cells": offsets,
        "by_sublattice": {b: w / total for b, w in weights.items()},
        "cell_map": cell_map / total,
        "branch_energy": float(ev[-1 if branch == "upper" else -2]),
    }


@dataclass
class FlatbandPairModes:
    """Eigenmodes of the projected interaction inside the kernel-pair space."""
    energies: np.ndarray          # ascending, >= 0
    coeff: np.ndarray             # (n_pair_coords, n_modes) orthonormal columns
    dark_mask: np.ndarray         # True where the mode is dark (zero energy)
    mode_basis: TwoExcitationBasis
    projector: FlatbandPairProjector
    ambiguous: bool = False       # an eigenvalue fell within 10x of the dark cutoff

    @property
    def n_dark(self) -> int:
        return int(self.dark_mask.sum())

    def expand(self, j: int) -> np.ndarray:
        """Mode j as a vector in the full two-excitation basis."""
        v = self.projector.kernel.basis
        chat = self.mode_basis.pack(self.coeff[:, j].astype(complex))
        return self.projector.basis.unpack(v @ chat @ v.T)

    def amplitudes(self, psi: np.ndarray) -> np.ndarray:
        """Overlaps <mode_j | psi> for all modes (out-of-subspace part ignored)."""
        s = self.projector.mode_overlap(psi)
        return self.coeff.T @ self.mode_basis.unpack(s)

    def weights(self, psi: np.ndarray) -> tuple[float, float]:
        """(dispersive, dark) weight of the state; sums to its flat-band weight."""
        a2 = np.abs(self.amplitudes(psi)) ** 2
        return float(a2[~self.dark_mask].sum()), float(a2[self.dark_mask].sum())


def classify_flatband_eigenstates(projector: FlatbandPairProjector, u: float,
                                  tol: float = 1e-8) -> FlatbandPairModes:
    """Diagonalize the projected on-site interaction in the kernel-pair space.

    Modes with eigenvalue <= tol * u are dark: they are annihilated by the
    (positive) interaction and, lying in the kernel-pair space, by the full
    two-excitation Hamiltonian -- exact nondecaying eigenstates.  The rest
    are the interaction-induced dispersive bound modes.
    """
    v = projector.kernel.basis
    m = projector.kernel.dim
    mode_basis = TwoExcitationBasis(m, SOFTCORE)
    a, b = mode_basis.i_idx, mode_basis.j_idx
    f = v[:, a] * v[:, b]
    f[:, a != b] *= math.sqrt(2.0)
    mat = (f.T @ f)
    energies, coeff = np.linalg.eigh(mat)
    energies = np.clip(energies, 0.0, None) * u
    cut = tol * max(u, 1e-300)
    dark = energies <= cut
    ambiguous = bool(np.any((energies > cut) & (energies <= 10.0 * cut)))
    return FlatbandPairModes(energies, coeff, dark, mode_basis, projector,
                             ambiguous=ambiguous)
