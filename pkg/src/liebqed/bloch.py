"""Momentum-space single-excitation theory of the infinite lattice.

Bloch waves diagonalize the coherent part of the emitter-emitter coupling,
(gamma/2) sin(k0 |x_i-x_j|), which is Hermitian.  The 3x3 Bloch matrix in
sublattice ordering (B, A, C) couples the corner emitter to each edge
emitter through its guide; edge emitters of different guides never couple
directly.  In the chiral configuration k0*d = m*pi all same-sublattice
couplings interfere destructively: the diagonal vanishes, the matrix
becomes bipartite, and a perfectly flat zero-energy band appears between
two symmetric dispersive bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NumericalError
from .lattice import LatticeSpec

_POLE_TOL = 1e-12


def epsilon_1d(k, spec: LatticeSpec):
    """Single-excitation dispersion of one emitter chain on one guide.

    epsilon(k) = (gamma/4) [cot((k0+k)d/2) + cot((k0-k)d/2)].  Diverges at
    k -> +-k0 (superradiant modes); the pole is signaled.  Accepts scalars
    or arrays.
    """
    k = np.asarray(k, dtype=float)
    sp_ = np.sin((spec.k0 + k) * spec.d / 2)
    sm = np.sin((spec.k0 - k) * spec.d / 2)
    if np.any(np.abs(sp_) < _POLE_TOL) or np.any(np.abs(sm) < _POLE_TOL):
        raise NumericalError("epsilon_1d pole: k at a superradiant divergence k = +-k0 (mod 2pi/d)")
    val = 0.25 * spec.gamma * (np.cos((spec.k0 + k) * spec.d / 2) / sp_
                               + np.cos((spec.k0 - k) * spec.d / 2) / sm)
    return val if val.ndim else float(val)


def chiral_coupling(k, spec: LatticeSpec):
    """Corner-edge coupling t(k) = (gamma/2) sin(k0 a) (1 + i tan(k d/2)) of the chiral lattice."""
    k = np.asarray(k, dtype=float)
    c = np.cos(k * spec.d / 2)
    if np.any(np.abs(c) < _POLE_TOL):
        raise NumericalError("coupling pole at the Brillouin-zone edge |k|d = pi")
    t = np.asarray(0.5 * spec.gamma * math.sin(spec.k0 * spec.a)
                   * (1 + 1j * np.tan(k * spec.d / 2)))
    return t if t.ndim else complex(t)


def _coupling_generic(k, spec: LatticeSpec):
    """t(k) for arbitrary k0*d (reduces to chiral_coupling when k0*d = m*pi)."""
    e1 = epsilon_1d(k, spec)
    s = math.sin(spec.k0 * spec.a)
    bracket = (1 / np.tan((spec.k0 + np.asarray(k)) * spec.d / 2)
               - 1 / np.tan((spec.k0 - np.asarray(k)) * spec.d / 2))
    return e1 * math.cos(spec.k0 * spec.a) + 0.5 * spec.gamma * s - 0.25j * spec.gamma * s * bracket


def bloch_hamiltonian(kx: float, ky: float, spec: LatticeSpec) -> np.ndarray:
    """3x3 Bloch matrix at (kx, ky), sublattice ordering (B, A, C)."""
    if spec.chiral:
        tx = chiral_coupling(kx, spec)
        ty = chiral_coupling(ky, spec)
        ex = ey = 0.0
    else:
        tx = _coupling_generic(kx, spec)
        ty = _coupling_generic(ky, spec)
        ex = epsilon_1d(kx, spec)
        ey = epsilon_1d(ky, spec)
    return np.array([[ex + ey, tx, ty],
                     [np.conj(tx), ex, 0.0],
                     [np.conj(ty), 0.0, ey]], dtype=complex)


def band_gap(spec: LatticeSpec) -> float:
    """Gap between the flat band and either dispersive band: (gamma/sqrt 2)|sin(k0 a)|."""
    spec.require_chiral()
    return spec.gamma / math.sqrt(2) * abs(math.sin(spec.k0 * spec.a))


def dispersive_energy(kx, ky, spec: LatticeSpec):
    """Upper dispersive band (gamma/2)|sin(k0 a)| sqrt(sec^2(kx d/2) + sec^2(ky d/2)) (chiral only)."""
    spec.require_chiral()
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    cx = np.cos(kx * spec.d / 2)
    cy = np.cos(ky * spec.d / 2)
    if np.any(np.abs(cx) < _POLE_TOL) or np.any(np.abs(cy) < _POLE_TOL):
        raise NumericalError("dispersive band diverges at the Brillouin-zone edge")
    val = 0.5 * spec.gamma * abs(math.sin(spec.k0 * spec.a)) * np.sqrt(cx ** -2 + cy ** -2)
    return val if val.ndim else float(val)


def shifted_k_grid(grid_size: int, spec: LatticeSpec) -> np.ndarray:
    """1D grid of `grid_size` momenta in (-pi/d, pi/d), shifted off the zone edge.

    Points sit half a step away from the edge poles; for even grid_size the
    grid also avoids k = 0 and is symmetric under k -> -k.
    """
    i = np.arange(grid_size)
    return (2 * i + 1 - grid_size) * math.pi / (grid_size * spec.d)


@dataclass
class BandStructure:
    k_grid: np.ndarray        # (n_k, 2)
    energies: np.ndarray      # (n_k, 3) ascending
    eigenvectors: np.ndarray  # (n_k, 3, 3) columns matched to energies


def band_structure(grid_size: int, spec: LatticeSpec) -> BandStructure:
    """Bands over the shifted grid_size x grid_size Brillouin-zone grid.

    Eigenvectors are gauge-fixed by rotating the largest-magnitude
    component to the positive real axis.
    """
    ks = shifted_k_grid(grid_size, spec)
    kxg, kyg = np.meshgrid(ks, ks, indexing="ij")
    kxs, kys = kxg.ravel(), kyg.ravel()
    n = kxs.size
    hmats = np.empty((n, 3, 3), dtype=complex)
    for m in range(n):
        hmats[m] = bloch_hamiltonian(kxs[m], kys[m], spec)
    energies, vecs = np.linalg.eigh(hmats)
    # gauge: largest component of each eigenvector real positive
    comp = np.argmax(np.abs(vecs), axis=1)                      # (n, 3) per column
    take = np.take_along_axis(vecs, comp[:, None, :], axis=1)[:, 0, :]
    phase = take / np.where(np.abs(take) == 0, 1.0, np.abs(take))
    vecs = vecs * np.conj(phase)[:, None, :]
    return BandStructure(np.column_stack([kxs, kys]), energies, vecs)


def refine_band_minimum(spec: LatticeSpec, k_start, band: int = 2):
    """Polish the minimum of band ``band`` from a coarse-grid starting point.

    Returns (k_min, e_min).  Uses direct 2D minimization of the band energy;
    needed because shifted grids straddle the true minimum at the zone center.
    """
    def objective(k):
        try:
            return np.linalg.eigvalsh(bloch_hamiltonian(k[0], k[1], spec))[band]
        except NumericalError:
            return np.inf

    res = minimize(objective, np.asarray(k_start, dtype=float), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
    return res.x, float(res.fun)
