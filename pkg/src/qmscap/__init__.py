"""Peripheral structure, capacities, codes and convergence analysis for
discrete quantum Markov semigroups (iterated quantum channels)."""

from .chanrep import (
    Channel,
    DensityMatrix,
    apply_channel,
    channel_from_json,
    channel_to_json,
    complementary_channel,
    compose,
    identity_channel,
    random_channel,
    replacer_channel,
    tensor,
    to_choi,
    to_transfer,
    validate_channel,
)
from .spectral import (
    PeripheralProjector,
    SpectrumReport,
    asymptotic_part,
    peripheral_projector,
    spectral_gap,
    spectrum,
)
from .blockstruct import (
    Block,
    PeripheralStructure,
    decompose_structure,
    extract_dynamics,
    peripheral_basis,
    reversal_channel,
)
from .opsys import (
    AlgebraBlockStructure,
    IndependenceNumbers,
    OperatorSystemSpace,
    algebra_block_structure,
    independence_numbers,
    is_star_algebra,
    operator_system,
    opsys_chain,
    zero_error_capacities,
)
from .capacity import (
    CapacityReport,
    DivergenceKind,
    RateInterval,
    blocklength_bounds,
    continuity_bounds,
    e_max_pure,
    i_max_of_channel,
    relative_entropy,
    storage_bounds,
    strong_additivity_bounds,
    transmission_bounds,
)
from .convergence import (
    ConvergenceReport,
    NormInterval,
    analytic_bound,
    convergence_report,
    diamond_norm_interval,
    iid_time_to_threshold,
    memory_lifetime_bound,
    time_to_threshold,
)
from .codes import (
    ChannelZooEntry,
    ClassicalCode,
    EntanglementAssistedCode,
    QuantumCode,
    build_classical_code,
    build_ea_code,
    build_quantum_code,
    evaluate_code,
    zoo,
)

__version__ = "0.1.0"
