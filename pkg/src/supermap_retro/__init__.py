"""Bayesian retrodiction of quantum supermaps.

Choi-operator calculus for channels and superchannels, the Petz recovery
channel, retrodiction supermap constructions with their analytical
families and circuit realizations, a constrained-unitary solver, and the
recovery-fidelity experiment harness.
"""

from .channels import (
    Channel,
    ChannelReport,
    DensityMatrix,
    Instrument,
    MeasurePrepareChannel,
    apply,
    apply_to_matrix,
    choi_of_kraus,
    compose_channels,
    depolarizing,
    fidelity,
    instrument_phi,
    kraus_of_choi,
    prior_gamma,
    tensor_channels,
    trace_out_channel,
    unitary_channel,
    validate_channel,
)
from .classical import (
    ConditionalDistribution,
    Distribution,
    bayes_posterior,
    jeffrey_update,
    s3_classical_update,
    s4_classical_update,
)
from .experiments import StrategyId, SweepResult, SweepSpec, average_fidelity, run_strategy, sweep
from .qmat import (
    QmatError,
    SystemDims,
    herm_sqrt,
    kron,
    partial_trace,
    permute_systems,
    pinv_sqrt,
)
from .retrodiction import (
    AngleFamily,
    Family,
    PropertyReport,
    RetrodictionBuild,
    analytical_build,
    analytical_v,
    build_from_v,
    circuit_realization,
    extract_v,
    family_prior,
    naive_petz_marginal,
    naive_petz_supermap,
    petz,
    retro_s1,
    retro_s2,
    retro_s3_coherence,
    retro_s4_measure_prepare,
    verify_properties,
)
from .supermaps import (
    Superchannel,
    SupermapReport,
    TeethRealization,
    apply_supermap,
    compose_supermaps,
    from_teeth,
    identity_supermap,
    s1_constructor,
    s2_constructor,
    s3_constructor,
    s4_constructor,
    supermap_rank,
    tensor_supermaps,
    validate_superchannel,
)
from .vsolver import SolverConfig, SolverResult, objective, solve

__version__ = "0.1.0"
