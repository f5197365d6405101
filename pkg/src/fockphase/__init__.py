"""Optimal two-mode phase estimation in finite-dimensional Fock space."""

__version__ = "0.1.0"

from .adaptive import (
    AdaptiveConfig,
    EnsembleSummary,
    Objective,
    PriorGrid,
    TrajectoryRecord,
    bayes_update,
    choose_control,
    default_prior,
    map_estimate,
    mutual_information,
    posterior_variance,
    run_ensemble,
    sharpness,
    simulate_outcome,
)
from .errors import (
    DegenerateEvidenceError,
    FockphaseError,
    NumericalError,
    SingularOutcomeError,
    UnsupportedBranchError,
    ValidationError,
)
from .fock import (
    BeamSplitterDirection,
    OperatorLabel,
    PhaseEncoding,
    TwoModeState,
    apply_linear_phase,
    apply_nonlinear_phase,
    beam_splitter_50_50,
    build_operator,
    encode_phase,
)
from .loss import (
    DensityMatrix,
    LossChannel,
    apply_loss,
    closed_form_rho,
    closed_form_rho_linear_high,
    closed_form_rho_linear_low,
    closed_form_rho_nonlinear_mid,
)
from .measurement import (
    MeasurementKind,
    MeasurementModel,
    OptimalPhaseSet,
    cfi_at,
    generic_probs,
    harmonic_table,
    max_cfi_parity_lossy,
    optimal_true_values,
    parity_probs,
    photon_counting_probs,
)
from .metrology import cfi, error_propagation_variance, qfi_mixed, qfi_pure
from .oracle import (
    OracleReport,
    ReducedProblem,
    brute_force_full,
    brute_force_reduced,
    locate_breakpoint,
)
from .probes import (
    ProbeSpec,
    Regime,
    RegimeTag,
    classify_regime,
    closed_form_qfi,
    entangled_coherent_qfi,
    mid_high_boundary,
    noon_state,
    optimal_state,
)
