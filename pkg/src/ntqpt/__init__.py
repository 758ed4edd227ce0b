"""Non-thermal symmetry-breaking transitions after quenches in collective
two-level models (two-mode Bose-Hubbard, Lipkin-Meshkov-Glick, Dicke)."""

__version__ = "0.1.0"

from .banded import BandedSymmetricMatrix
from .errors import (
    ConfigurationError,
    DetectorError,
    DiagonalizationError,
    FitError,
    NtqptError,
    PhaseError,
    TargetingError,
    TruncationError,
)
from .models import (
    CoherentParams,
    Model,
    ModelSpec,
    StateVector,
    build_coherent_state,
    build_hamiltonian,
    build_order_parameter,
    build_parity,
    semiclassical_critical_energy,
    variational_ground_state,
)
from .quench import (
    EquilibriumEnsemble,
    QuenchResult,
    QuenchSetup,
    build_equilibrium_ensemble,
    expand_initial_state,
    expectation,
    run_quench,
    thermal_reference,
    time_average_oracle,
)
from .scaling import (
    ExponentReport,
    PowerLawFit,
    SweepSpec,
    extract_exponents,
    fit_power_law,
    sweep_order_parameter,
    target_energy,
)
from .spectral import (
    ParitySpectrum,
    PrecursorEstimate,
    detect_precursor,
    diagonalize,
    diagonalize_by_parity,
    pair_doublets,
)
