"""Particle Gibbs samplers with ancestor sampling and grid-HMM proposals."""

from .errors import (
    ConfigurationError,
    DegenerateWeightsError,
    GpgasError,
    InitializationError,
    ParameterDomainError,
)
from .grid import (
    FreezePolicy,
    Grid,
    GridProposal,
    HmmApprox,
    ProposalTable,
    WithinCellSampler,
    approx_hmm,
    build_grid,
    evaluate_proposal_logq,
    freeze,
    grid_proposal,
    locate_cell,
    tilted_row,
)
from .rng import Stream
from .samplers import (
    ChainRecord,
    DiagnosticsRecord,
    GridConfig,
    SamplerConfig,
    fixed_parameters,
    gpgas_run,
    pg_run,
    pgas_run,
    run_sampler,
    sample_trajectory,
)
from .smc import (
    BootstrapProposal,
    ParticleSystem,
    WeightLedger,
    ancestor_weights,
    csmc_as_run,
    csmc_run,
    effective_sample_size,
    multinomial_resample,
    smc_run,
)
from .ssm import ObservationSeries, StatePath, StatePoint, simulate_dataset

__all__ = [
    "BootstrapProposal",
    "ChainRecord",
    "ConfigurationError",
    "DegenerateWeightsError",
    "DiagnosticsRecord",
    "FreezePolicy",
    "GpgasError",
    "Grid",
    "GridConfig",
    "GridProposal",
    "HmmApprox",
    "InitializationError",
    "ObservationSeries",
    "ParameterDomainError",
    "ParticleSystem",
    "ProposalTable",
    "SamplerConfig",
    "StatePath",
    "StatePoint",
    "Stream",
    "WeightLedger",
    "WithinCellSampler",
    "ancestor_weights",
    "approx_hmm",
    "build_grid",
    "csmc_as_run",
    "csmc_run",
    "effective_sample_size",
    "evaluate_proposal_logq",
    "fixed_parameters",
    "freeze",
    "gpgas_run",
    "grid_proposal",
    "locate_cell",
    "multinomial_resample",
    "pg_run",
    "pgas_run",
    "run_sampler",
    "sample_trajectory",
    "simulate_dataset",
    "smc_run",
    "tilted_row",
]
