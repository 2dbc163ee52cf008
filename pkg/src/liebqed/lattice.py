"""Lieb-lattice geometry and waveguide connectivity.

The emitter array consists of three sublattices per unit cell: a corner
emitter B at the crossing point of a horizontal and a vertical waveguide,
an edge emitter A displaced by the intracell distance ``a`` along the
horizontal guide, and an edge emitter C displaced by ``a`` along the
vertical guide.  Every horizontal guide (one per cell row) carries the B
and A emitters of that row; every vertical guide (one per cell column)
carries the B and C emitters of that column.  Photons propagate only
within a single guide, so two emitters interact iff they share one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SUBLATTICES = ("A", "B", "C")
_SUB_INDEX = {"A": 0, "B": 1, "C": 2}

HARDCORE = "hardcore"


@dataclass(frozen=True)
class LatticeSpec:
    """Physical parameters of the emitter network.

    Energies are in units of gamma and lengths in units of d unless the
    defaults are overridden.  ``u`` is the on-site photon-photon
    interaction; the string ``"hardcore"`` selects two-level (spin)
    statistics instead of a finite bosonic interaction.
    """

    nx: int
    ny: int
    d: float = 1.0
    a: float = 0.5
    k0: float = math.pi
    gamma: float = 1.0
    u: float | str = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be >= 1, got {self.nx}x{self.ny}")
        if not 0 < self.a < self.d:
            raise ValueError(f"intracell distance must satisfy 0 < a < d, got a={self.a}, d={self.d}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if isinstance(self.u, str):
            if self.u != HARDCORE:
                raise ValueError(f"u must be a nonnegative rate or '{HARDCORE}', got {self.u!r}")
        elif self.u < 0:
            raise ValueError(f"u must be nonnegative, got {self.u}")

    @property
    def n_sites(self) -> int:
        return 3 * self.nx * self.ny

    @property
    def hardcore(self) -> bool:
        return self.u == HARDCORE

    @property
    def chiral(self) -> bool:
        """True when k0*d is an integer multiple of pi (within 1e-12 relative).

        In this configuration same-sublattice emitters on a guide interfere
        destructively and the coherent part of their coupling vanishes,
        which is what produces the flat band.
        """
        x = self.k0 * self.d / math.pi
        return abs(x - round(x)) <= 1e-12 * max(1.0, abs(x))

    def require_chiral(self):
        if not self.chiral:
            raise ValueError(f"operation requires the chiral configuration k0*d = m*pi, got k0*d = {self.k0 * self.d}")


@dataclass(frozen=True)
class Site:
    cell: tuple[int, int]
    sublattice: str
    position: tuple[float, float]
    flat_index: int


class SiteTable:
    """Enumerated emitter sites with deterministic flat indexing.

    Flat index = 3*(ry*nx + rx) + offset with offsets A:0, B:1, C:2,
    i.e. row-major by cell and then A, B, C within the cell.
    """

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        nx, ny, d, a = spec.nx, spec.ny, spec.d, spec.a
        n = spec.n_sites
        self.positions = np.empty((n, 2))
        self.cells = np.empty((n, 2), dtype=int)
        self.sublattice = np.empty(n, dtype="U1")
        for ry in range(ny):
            for rx in range(nx):
                base = 3 * (ry * nx + rx)
                bx, by = rx * d, ry * d
                for off, sub, pos in ((0, "A", (bx + a, by)),
                                      (1, "B", (bx, by)),
                                      (2, "C", (bx, by + a))):
                    i = base + off
                    self.positions[i] = pos
                    self.cells[i] = (rx, ry)
                    self.sublattice[i] = sub

    def __len__(self):
        return self.spec.n_sites

    def index(self, rx: int, ry: int, sub: str) -> int:
        """Flat index of the ``sub`` site of cell (rx, ry)."""
        nx, ny = self.spec.nx, self.spec.ny
        if not (0 <= rx < nx and 0 <= ry < ny):
            raise IndexError(f"cell ({rx}, {ry}) outside {nx}x{ny} lattice")
        return 3 * (ry * nx + rx) + _SUB_INDEX[sub]

    def site(self, i: int) -> Site:
        return Site(cell=tuple(self.cells[i]), sublattice=str(self.sublattice[i]),
                    position=tuple(self.positions[i]), flat_index=i)

    def sites(self):
        return [self.site(i) for i in range(len(self))]

    def to_csv_rows(self):
        """Rows (flat_index, rx, ry, sublattice, x, y) for export."""
        for i in range(len(self)):
            yield (i, int(self.cells[i, 0]), int(self.cells[i, 1]),
                   str(self.sublattice[i]), self.positions[i, 0], self.positions[i, 1])


@dataclass(frozen=True)
class Waveguide:
    """One 1D guide: member site indices and their coordinate along it."""
    orientation: str          # "h" or "v"
    line: int                 # row index (h) or column index (v)
    sites: np.ndarray = field(repr=False)
    coords: np.ndarray = field(repr=False)


class WaveguideNetwork:
    """Guide membership and 1D separations of emitter pairs.

    ``pair_map`` maps each unordered connected pair (i, j), i <= j, to the
    separation |x_i - x_j| along their common guide; diagonal entries
    (i, i) count once per guide the site touches and carry distance 0.
    No pair of distinct sites shares more than one guide.
    """

    def __init__(self, table: SiteTable):
        self.table = table
        spec = table.spec
        guides = []
        for ry in range(spec.ny):
            idx = [table.index(rx, ry, s) for rx in range(spec.nx) for s in ("B", "A")]
            idx = np.array(idx, dtype=int)
            guides.append(Waveguide("h", ry, idx, table.positions[idx, 0].copy()))
        for rx in range(spec.nx):
            idx = [table.index(rx, ry, s) for ry in range(spec.ny) for s in ("B", "C")]
            idx = np.array(idx, dtype=int)
            guides.append(Waveguide("v", rx, idx, table.positions[idx, 1].copy()))
        self.waveguides = guides

        pair_map: dict[tuple[int, int], float] = {}
        touches = np.zeros(len(table), dtype=int)
        for g in guides:
            touches[g.sites] += 1
            for p, i in enumerate(g.sites):
                for q in range(p, len(g.sites)):
                    j = g.sites[q]
                    key = (i, j) if i <= j else (j, i)
                    r = abs(g.coords[p] - g.coords[q])
                    if i != j and key in pair_map:
                        raise AssertionError(f"sites {key} share more than one waveguide")
                    pair_map[key] = r
        self.pair_map = pair_map
        self.touches = touches  # 1 for A and C sites, 2 for B sites

    def distance(self, i: int, j: int) -> float:
        """1D separation along the shared guide; KeyError if unconnected."""
        return self.pair_map[(i, j) if i <= j else (j, i)]

    def connected(self, i: int, j: int) -> bool:
        return ((i, j) if i <= j else (j, i)) in self.pair_map


def build_lattice(spec: LatticeSpec) -> SiteTable:
    """Enumerate the 3*nx*ny emitter sites of the lattice."""
    return SiteTable(spec)


def build_network(table: SiteTable) -> WaveguideNetwork:
    """Group sites into horizontal and vertical guides and tabulate pair separations."""
    return WaveguideNetwork(table)
