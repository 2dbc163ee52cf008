"""Compact localized states, the flat-band kernel, and the pair projector.

On the open chiral lattice the flat band is spanned by compact localized
states (CLS): for any cell R0 with both a left and a lower neighbor, the
state with amplitudes +1/2 on A(R0) and A(R0 - x), and -1/2 on C(R0) and
C(R0 - y), is annihilated exactly by the effective Hamiltonian -- the two
A sites and the two C sites couple to every guide with opposite phases.
The (nx-1)(ny-1) translates of this state span the null space of h1.

Two-excitation flat-band weights use the projector onto the symmetrized
tensor square of that null space.  For hardcore statistics the state lives
in the zero-double-occupancy sector; its flat-band weight is defined by
embedding into the bosonic sector and applying the same projector there
(the compression of a projector to a subspace it does not leave invariant
is Hermitian but not idempotent, and the hardcore weight reflects the
double-occupancy amplitude genuinely missing from the spin state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .hamiltonian import SOFTCORE, TwoExcitationBasis
from .lattice import SiteTable


@dataclass(frozen=True)
class CompactLocalizedState:
    center: tuple[int, int]
    amplitudes: dict  # flat site index -> amplitude (+-1/2)
    n_sites: int

    def vector(self) -> np.ndarray:
        v = np.zeros(self.n_sites)
        for i, a in self.amplitudes.items():
            v[i] = a
        return v


def valid_cls_centers(table: SiteTable):
    """Cells (rx, ry) with rx >= 1 and ry >= 1, i.e. with both needed neighbors."""
    spec = table.spec
    return [(rx, ry) for ry in range(1, spec.ny) for rx in range(1, spec.nx)]


def cls_amplitudes(r0: tuple[int, int], table: SiteTable) -> CompactLocalizedState:
    """The four-site dark state centered on the corner emitter of cell r0."""
    rx, ry = r0
    if rx < 1 or ry < 1 or rx >= table.spec.nx or ry >= table.spec.ny:
        raise ValueError(f"CLS center {r0} needs cells ({rx-1},{ry}) and ({rx},{ry-1}) inside the lattice")
    amps = {
        table.index(rx, ry, "A"): 0.5,
        table.index(rx - 1, ry, "A"): 0.5,
        table.index(rx, ry, "C"): -0.5,
        table.index(rx, ry - 1, "C"): -0.5,
    }
    return CompactLocalizedState((rx, ry), amps, len(table))


def cls_family(table: SiteTable) -> np.ndarray:
    """Matrix whose columns are all valid CLS vectors (not orthogonal)."""
    centers = valid_cls_centers(table)
    c = np.zeros((len(table), len(centers)))
    for m, r0 in enumerate(centers):
        c[:, m] = cls_amplitudes(r0, table).vector()
    return c


@dataclass(frozen=True)
class FlatbandKernel:
    """Orthonormal real basis of the right null space of h1."""
    basis: np.ndarray            # (N, dim)
    dim: int
    singular_values: np.ndarray  # full spectrum, descending
    tol: float


def expected_kernel_dim(spec) -> int:
    return (spec.nx - 1) * (spec.ny - 1)


def flatband_kernel(h1: np.ndarray, tol: float | None = None,
                    expected_dim: int | None = None) -> FlatbandKernel:
    """Null space of h1 by singular value decomposition.

    h1 is non-normal, so the space annihilated under evolution is the right
    null space, not an eigenspace of a Hermitian problem.  The returned
    basis is realified (the null space carries a real basis) and
    orthonormal.  Raises if the singular spectrum has no factor-10 gap at
    the cut, or if ``expected_dim`` is given and does not match.
    """
    u, s, vh = np.linalg.svd(h1)
    if tol is None:
        tol = 1e-10 * s[0]
    dim = int(np.sum(s < tol))
    if dim == 0:
        raise NumericalError(f"no singular values below tol={tol:g} (smallest {s[-1]:.3e})")
    kept = s[-dim]                       # largest singular value treated as zero
    discarded = s[-dim - 1] if dim < len(s) else None
    if discarded is not None and (kept > 0 and discarded < 10 * kept):
        raise NumericalError(
            f"ill-separated singular spectrum at the null-space cut: {discarded:.3e} vs {kept:.3e}")
    if expected_dim is not None and dim != expected_dim:
        raise NumericalError(f"kernel dimension {dim} != expected {expected_dim}")
    v = vh.conj().T[:, len(s) - dim:]
    # realify: the null space of the complex-symmetric h1 is spanned by real vectors
    stacked = np.hstack([v.real, v.imag])
    q, sv, _ = np.linalg.svd(stacked, full_matrices=False)
    basis = q[:, :dim]
    resid = np.linalg.norm(h1 @ basis, axis=0)
    if np.any(resid > max(tol, 1e-10 * s[0]) * 10):
        raise NumericalError(f"realified null basis residual too large: {resid.max():.3e}")
    return FlatbandKernel(basis, dim, s, tol)


def verify_cls_span(kernel: FlatbandKernel, table: SiteTable, tol: float = 1e-8) -> float:
    """Check the CLS family spans the kernel; returns the worst projector residual.

    Ensures rank(CLS family) == kernel dim via the Gram spectrum (cut at
    ``tol``) and that every CLS lies in the kernel span.
    """
    c = cls_family(table)
    gram = c.T @ c
    rank = int(np.sum(np.linalg.eigvalsh(gram) > tol))
    if rank != kernel.dim:
        raise NumericalError(f"CLS family rank {rank} != kernel dimension {kernel.dim}")
    proj = kernel.basis @ (kernel.basis.T @ c)
    resid = np.linalg.norm(c - proj, axis=0) / np.linalg.norm(c, axis=0)
    return float(resid.max())


class FlatbandPairProjector:
    """Projector onto the flat-band two-excitation subspace, applied matrix-free.

    A pair state with amplitude matrix Psi (see TwoExcitationBasis.pack)
    projects to V (V^T Psi V) V^T where V is the kernel basis.  The object
    never materializes the dim^2 projector; ``to_dense`` exists for small
    cross-checks.  For a hardcore state the same bosonic projector acts on
    the embedded (zero-diagonal) amplitude matrix, and the result is
    compressed back by dropping the diagonal.
    """

    def __init__(self, kernel: FlatbandKernel, basis: TwoExcitationBasis):
        if kernel.basis.shape[0] != basis.n_sites:
            raise ValueError("kernel and two-excitation basis disagree on the site count")
        self.kernel = kernel
        self.basis = basis

    @property
    def subspace_dim(self) -> int:
        m = self.kernel.dim
        return m * (m + 1) // 2

    def mode_overlap(self, psi: np.ndarray) -> np.ndarray:
        """S = V^T Psi V, the kernel-mode amplitude matrix of the state."""
        v = self.kernel.basis
        return v.T @ self.basis.pack(psi) @ v

    def apply(self, psi: np.ndarray) -> np.ndarray:
        v = self.kernel.basis
        s = self.mode_overlap(psi)
        return self.basis.unpack(v @ s @ v.T)

    def quadratic_form(self, psi: np.ndarray) -> float:
        """<psi|P|psi> = 2 ||V^T Psi V||_F^2 (flat-band weight of the state)."""
        s = self.mode_overlap(psi)
        return float(2.0 * np.sum(np.abs(s) ** 2))

    def to_dense(self) -> np.ndarray:
        dim = len(self.basis)
        p = np.empty((dim, dim), dtype=complex)
        e = np.zeros(dim, dtype=complex)
        for k in range(dim):
            e[k] = 1.0
            p[:, k] = self.apply(e)
            e[k] = 0.0
        return p


def two_excitation_flatband_projector(kernel: FlatbandKernel,
                                      basis: TwoExcitationBasis) -> FlatbandPairProjector:
    return FlatbandPairProjector(kernel, basis)


def cls_initial_state(r0: tuple[int, int], r1: tuple[int, int], table: SiteTable,
                      basis: TwoExcitationBasis,
                      exclude_double: bool = False) -> np.ndarray:
    """Normalized two-excitation state of CLSs excited at adjacent centers r0, r1.

    r1 must equal r0 + x.  Softcore keeps the doubly-occupied component on
    the shared A site; hardcore drops it (two-level emitters) and
    renormalizes.  ``exclude_double`` drops that component in the softcore
    basis too (the spin-built state of the two-level study, which the U
    sweep uses at every interaction strength); it is a no-op for hardcore.
    """
    if (r1[0] - r0[0], r1[1] - r0[1]) != (1, 0):
        raise ValueError(f"centers must be adjacent along x: got {r0}, {r1}")
    c1 = cls_amplitudes(r0, table).vector()
    c2 = cls_amplitudes(r1, table).vector()
    prod = 0.5 * (np.outer(c1, c2) + np.outer(c2, c1))
    if exclude_double:
        np.fill_diagonal(prod, 0.0)
    psi = basis.unpack(prod.astype(complex))
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("initial state vanished (overlapping centers?)")
    return psi / nrm
