"""Cascade capacities on dyadic trees: redundancy via ancestor dilation,
sparse Bernoulli sampling, closed-form multifractal predictions, and the
Monte-Carlo machinery to check them."""

from .cascade import (
    CascadeModel,
    cascade_field,
    log2_capacity,
    log2_capacity_3I,
    sigma,
    tau,
    tau_prime,
)
from .dyadic import DyadicIndex, NeighborSet, ancestor, index_of_point, neighbors
from .errors import ComparisonError, ConfigError
from .operators import LeaderField, OperatorParams, dilated_capacity, leaders, mrho_field
from .sampling import (
    EpsilonSchedule,
    SamplingConfig,
    SurvivorCache,
    SurvivorSet,
    check_covering,
    check_crowding,
    epsilon_j,
    survivors,
    survivors_in,
)
from .spectra import (
    LDEstimate,
    SpectrumCurve,
    empirical_tau,
    ld_histogram,
    legendre,
    local_dim_trace,
)
from .theory import (
    FormalismSet,
    PhaseParams,
    PredictedSpectra,
    formalism_report,
    formalism_set,
    oracle_D_tilde,
    oracle_curve,
    predicted_sigma,
    predicted_spectra,
    predicted_tau,
    solve_phase_params,
    tau_star_closed,
    theta_rho,
    theta_rho_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "CascadeModel", "DyadicIndex", "NeighborSet", "SamplingConfig",
    "SurvivorSet", "SurvivorCache", "EpsilonSchedule", "OperatorParams",
    "LeaderField", "SpectrumCurve", "LDEstimate", "PhaseParams",
    "PredictedSpectra", "FormalismSet", "ConfigError", "ComparisonError",
    "ancestor", "neighbors", "index_of_point", "tau", "tau_prime", "sigma",
    "log2_capacity", "log2_capacity_3I", "cascade_field", "survivors",
    "survivors_in", "check_covering", "check_crowding", "epsilon_j",
    "mrho_field", "leaders", "dilated_capacity", "empirical_tau",
    "ld_histogram", "legendre", "local_dim_trace", "solve_phase_params",
    "predicted_sigma", "predicted_tau", "predicted_spectra", "formalism_set",
    "formalism_report", "oracle_D_tilde", "oracle_curve", "tau_star_closed",
    "theta_rho", "theta_rho_inverse",
]
