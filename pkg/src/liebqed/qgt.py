"""Quantum geometric tensor of the chiral Bloch bands.

T_ij(k) for band n is the gauge-invariant sum over the other bands,

    T_ij = sum_{m != n} <n|d_i H|m><m|d_j H|n> / (E_n - E_m)^2,

evaluated with analytic derivatives of the Bloch matrix, so no
wavefunction gauge fixing enters.  For the flat band the sum collapses to
a closed form in cx = cos(kx d/2), cy = cos(ky d/2):

    T_xx = (d^2/4) cy^2 / (cx^2+cy^2)^2
    T_yy = (d^2/4) cx^2 / (cx^2+cy^2)^2
    T_xy = -(d^2/4) cx cy e^{i(kx-ky)d/2} / (cx^2+cy^2)^2

Re T is the quantum metric, Omega = -2 Im T_xy the Berry curvature.  The
Brillouin-zone integral of Re T_xy equals -pi/2 (quadrature on shifted
symmetric grids; the zone-corner singularity is odd and cancels), and the
Chern number vanishes by time-reversal symmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import bloch_hamiltonian, shifted_k_grid
from .errors import NumericalError
from .lattice import LatticeSpec

_LAMBDA2 = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]])
_LAMBDA5 = np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]])


@dataclass(frozen=True)
class QGTValue:
    k: tuple[float, float]
    band: int
    t_xx: float
    t_yy: float
    t_xy: complex

    @property
    def metric(self) -> np.ndarray:
        """Quantum metric g = Re T."""
        return np.array([[self.t_xx, self.t_xy.real], [self.t_xy.real, self.t_yy]])

    @property
    def berry_curvature(self) -> float:
        return -2.0 * self.t_xy.imag


def bloch_hamiltonian_derivative(kx: float, ky: float, axis: str, spec: LatticeSpec) -> np.ndarray:
    """Analytic d H(k)/d k_axis of the chiral Bloch matrix (ordering B, A, C)."""
    spec.require_chiral()
    k = kx if axis == "x" else ky
    lam = _LAMBDA2 if axis == "x" else _LAMBDA5
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    c = math.cos(k * spec.d / 2)
    if abs(c) < 1e-12:
        raise NumericalError("Bloch derivative pole at the Brillouin-zone edge")
    coeff = -0.5 * spec.gamma * math.sin(spec.k0 * spec.a) * (spec.d / 2) / c ** 2
    return coeff * lam


def qgt_generic(kx: float, ky: float, band: int, spec: LatticeSpec,
                gap_tol: float = 1e-8) -> QGTValue:
    """Sum-over-states quantum geometric tensor for one band at one k."""
    h = bloch_hamiltonian(kx, ky, spec)
    energies, vecs = np.linalg.eigh(h)
    others = [m for m in range(3) if m != band]
    gaps = [abs(energies[band] - energies[m]) for m in others]
    if min(gaps) < gap_tol:
        raise NumericalError(f"near-degenerate bands at k=({kx}, {ky}): gap {min(gaps):.3e}")
    dx = bloch_hamiltonian_derivative(kx, ky, "x", spec)
    dy = bloch_hamiltonian_derivative(kx, ky, "y", spec)
    vn = vecs[:, band]
    t = np.zeros((2, 2), dtype=complex)
    for m in others:
        vm = vecs[:, m]
        denom = (energies[band] - energies[m]) ** 2
        ax = np.vdot(vn, dx @ vm)
        ay = np.vdot(vn, dy @ vm)
        t[0, 0] += ax * np.conj(ax) / denom
        t[1, 1] += ay * np.conj(ay) / denom
        t[0, 1] += ax * np.conj(ay) / denom
    return QGTValue((kx, ky), band, float(t[0, 0].real), float(t[1, 1].real), complex(t[0, 1]))


def _closed_form_arrays(kx, ky, spec: LatticeSpec):
    """Vectorized flat-band closed form; returns (t_xx, t_yy, t_xy) arrays."""
    cx = np.cos(np.asarray(kx) * spec.d / 2)
    cy = np.cos(np.asarray(ky) * spec.d / 2)
    denom = (cx ** 2 + cy ** 2) ** 2
    if np.any(denom < 1e-24):
        raise NumericalError("flat-band tensor singular at the Brillouin-zone corner")
    pref = spec.d ** 2 / 4
    t_xx = pref * cy ** 2 / denom
    t_yy = pref * cx ** 2 / denom
    t_xy = -pref * cx * cy * np.exp(0.5j * (np.asarray(kx) - np.asarray(ky)) * spec.d) / denom
    return t_xx, t_yy, t_xy


def qgt_closed_form(kx: float, ky: float, spec: LatticeSpec) -> QGTValue:
    """Closed-form flat-band tensor at one k (chiral lattice)."""
    spec.require_chiral()
    t_xx, t_yy, t_xy = _closed_form_arrays(float(kx), float(ky), spec)
    return QGTValue((kx, ky), 1, float(t_xx), float(t_yy), complex(t_xy))


@dataclass(frozen=True)
class QGTIntegrals:
    grid_sizes: tuple[int, int]
    re_txy: tuple[float, float]       # per grid
    im_txy: tuple[float, float]
    berry: tuple[float, float]
    re_txy_extrapolated: float
    im_txy_extrapolated: float
    chern: int
    drift: float


def integrate_qgt(grid_size: int, spec: LatticeSpec, drift_tol: float = 1e-2) -> QGTIntegrals:
    """Brillouin-zone integrals of the flat-band tensor with Richardson step.

    Midpoint sums on the shifted ``grid_size`` and ``2*grid_size`` grids;
    the h^2 -> 0 extrapolation is (4 I_fine - I_coarse)/3.  The Chern
    number is the rounded Berry-curvature integral over 2 pi.
    """
    spec.require_chiral()
    results = []
    for n in (grid_size, 2 * grid_size):
        ks = shifted_k_grid(n, spec)
        kxg, kyg = np.meshgrid(ks, ks, indexing="ij")
        _, _, t_xy = _closed_form_arrays(kxg, kyg, spec)
        cell = (2 * math.pi / (n * spec.d)) ** 2
        results.append((float(np.sum(t_xy.real)) * cell, float(np.sum(t_xy.imag)) * cell))
    re_c, im_c = results[0]
    re_f, im_f = results[1]
    re_ext = (4 * re_f - re_c) / 3
    im_ext = (4 * im_f - im_c) / 3
    berry = (-2 * im_c, -2 * im_f)
    chern_val = -2 * im_ext / (2 * math.pi)
    drift = abs(re_ext - re_f)
    if drift > drift_tol:
        raise NumericalError(f"metric integral not converged: extrapolation drift {drift:.3e}")
    return QGTIntegrals((grid_size, 2 * grid_size), (re_c, re_f), (im_c, im_f), berry,
                        re_ext, im_ext, int(round(chern_val)), drift)
