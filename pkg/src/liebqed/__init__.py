"""Waveguide-mediated emitter lattices: flat bands, dark pairs, transport.

Emitters coupled to a grid of crossed one-dimensional waveguides form a
three-site-per-cell lattice whose photon-mediated couplings produce a
perfectly flat, perfectly dark middle band.  This package builds the
effective non-Hermitian Hamiltonian of such networks and analyzes it in
the one- and two-excitation sectors: band structure and quantum geometry,
compact localized states, interaction-induced bound photon pairs, and the
real-time transport they generate.
"""

from .bloch import (
    BandStructure,
    band_gap,
    band_structure,
    bloch_hamiltonian,
    chiral_coupling,
    dispersive_energy,
    epsilon_1d,
    refine_band_minimum,
    shifted_k_grid,
)
from .dynamics import (
    EvolutionTrace,
    SweepResult,
    fit_exponential_decay,
    fit_linear_origin,
    observables,
    oscillation_frequency,
    plateau_stats,
    propagate,
    site_population,
    standard_observers,
    sweep_interaction,
)
from .errors import NumericalError
from .flatband import (
    CompactLocalizedState,
    FlatbandKernel,
    FlatbandPairProjector,
    cls_amplitudes,
    cls_family,
    cls_initial_state,
    expected_kernel_dim,
    flatband_kernel,
    two_excitation_flatband_projector,
    valid_cls_centers,
    verify_cls_span,
)
from .hamiltonian import (
    SOFTCORE,
    TwoExcitationBasis,
    single_excitation_hamiltonian,
    two_excitation_basis,
    two_excitation_hamiltonian,
    write_triplets,
)
from .lattice import (
    HARDCORE,
    SUBLATTICES,
    LatticeSpec,
    SiteTable,
    WaveguideNetwork,
    build_lattice,
    build_network,
)
from .pairs import (
    FlatbandPairModes,
    PairBasis,
    PairSpectrum,
    branch_energies,
    classify_flatband_eigenstates,
    flatband_bloch_vector,
    interaction_matrix,
    pair_basis,
    pair_spectrum,
    relative_population,
)
from .qgt import (
    QGTIntegrals,
    QGTValue,
    bloch_hamiltonian_derivative,
    integrate_qgt,
    qgt_closed_form,
    qgt_generic,
)

__version__ = "0.1.0"

__all__ = [
    "BandStructure",
    "CompactLocalizedState",
    "EvolutionTrace",
    "FlatbandKernel",
    "FlatbandPairModes",
    "FlatbandPairProjector",
    "HARDCORE",
    "LatticeSpec",
    "NumericalError",
    "PairBasis",
    "PairSpectrum",
    "QGTIntegrals",
    "QGTValue",
    "SOFTCORE",
    "SUBLATTICES",
    "SiteTable",
    "SweepResult",
    "TwoExcitationBasis",
    "WaveguideNetwork",
    "band_gap",
    "band_structure",
    "bloch_hamiltonian",
    "bloch_hamiltonian_derivative",
    "branch_energies",
    "build_lattice",
    "build_network",
    "chiral_coupling",
    "classify_flatband_eigenstates",
    "cls_amplitudes",
    "cls_family",
    "cls_initial_state",
    "dispersive_energy",
    "epsilon_1d",
    "expected_kernel_dim",
    "fit_exponential_decay",
    "fit_linear_origin",
    "flatband_bloch_vector",
    "flatband_kernel",
    "integrate_qgt",
    "interaction_matrix",
    "observables",
    "oscillation_frequency",
    "pair_basis",
    "pair_spectrum",
    "plateau_stats",
    "propagate",
    "qgt_closed_form",
    "qgt_generic",
    "refine_band_minimum",
    "relative_population",
    "shifted_k_grid",
    "single_excitation_hamiltonian",
    "site_population",
    "standard_observers",
    "sweep_interaction",
    "two_excitation_basis",
    "two_excitation_flatband_projector",
    "two_excitation_hamiltonian",
    "write_triplets",
    "valid_cls_centers",
    "verify_cls_span",
]
