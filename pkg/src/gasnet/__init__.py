"""Transient gas pipeline networks: simulation and joint state/friction estimation.

The package models slow transients in a pipeline network as a lumped
differential-algebraic system on a time-periodic grid, simulates one
period of the dynamics, and recovers per-pipe friction factors together
with the full space-time state from sparse, noisy pressure and
withdrawal records.
"""

from .dae import (
    SMOOTHING_EPS,
    CircularDae,
    IncidenceMatrices,
    VariableLayout,
    build_incidence,
    build_weighted_incidence,
    mass_residual,
    momentum_residual,
)
from .errors import (
    DimensionMismatch,
    GasNetError,
    InfeasibleBoxes,
    InfeasibleDetected,
    InfeasibleRefinement,
    InvariantViolation,
    MalformedFile,
    MissingRatio,
    NegativeDensity,
    NegativePressure,
    NonConvergence,
    NonpositiveFactor,
    ScaleMismatch,
    SchemaViolation,
    SingularJacobian,
    SingularKKT,
)
from .estimate import (
    EstimationOptions,
    EstimationProblem,
    EstimationSolution,
    Weights,
    build_estimation_problem,
    evaluate_objective,
    load_weights,
    run_estimation,
    solve_estimation,
)
from .ipsolver import IpResult, solve as solve_nlp
from .network import (
    Compressor,
    GasNetwork,
    GasProperties,
    Junction,
    Pipe,
    apply_efficiency_factor,
    density_to_pressure,
    make_gas_properties,
    network_from_dict,
    network_to_dict,
    parse_network,
    pressure_to_density,
    save_network,
)
from .nondim import (
    DimensionalState,
    NondimNetwork,
    NondimProfiles,
    Scales,
    SpaceTimeState,
    check_scales,
    default_scales,
    nondimensionalize,
    nondimensionalize_network,
    nondimensionalize_profiles,
    nondimensionalize_state,
    redimensionalize_state,
)
from .refinement import (
    RefinedNetwork,
    check_window,
    refine_graph,
    segment_count,
)
from .simulate import (
    NoiseSpec,
    average_boundary,
    inject_noise,
    simulate_network,
    simulation_diagnostics,
    steady_state_solve,
    transient_simulate,
)
from .timeseries import (
    KnownBoundaries,
    MeasurementSet,
    ProfileSet,
    TimeGrid,
    read_measurements,
    read_profiles,
    resample_periodic,
    write_measurements,
    write_profiles,
)

__version__ = "0.1.0"

__all__ = [
    "SMOOTHING_EPS",
    "CircularDae",
    "IncidenceMatrices",
    "VariableLayout",
    "build_incidence",
    "build_weighted_incidence",
    "mass_residual",
    "momentum_residual",
    "DimensionMismatch",
    "GasNetError",
    "InfeasibleBoxes",
    "InfeasibleDetected",
    "InfeasibleRefinement",
    "InvariantViolation",
    "MalformedFile",
    "MissingRatio",
    "NegativeDensity",
    "NegativePressure",
    "NonConvergence",
    "NonpositiveFactor",
    "ScaleMismatch",
    "SchemaViolation",
    "SingularJacobian",
    "SingularKKT",
    "EstimationOptions",
    "EstimationProblem",
    "EstimationSolution",
    "Weights",
    "build_estimation_problem",
    "evaluate_objective",
    "load_weights",
    "run_estimation",
    "solve_estimation",
    "IpResult",
    "solve_nlp",
    "Compressor",
    "GasNetwork",
    "GasProperties",
    "Junction",
    "Pipe",
    "apply_efficiency_factor",
    "density_to_pressure",
    "make_gas_properties",
    "network_from_dict",
    "network_to_dict",
    "parse_network",
    "pressure_to_density",
    "save_network",
    "DimensionalState",
    "NondimNetwork",
    "NondimProfiles",
    "Scales",
    "SpaceTimeState",
    "check_scales",
    "default_scales",
    "nondimensionalize",
    "nondimensionalize_network",
    "nondimensionalize_profiles",
    "nondimensionalize_state",
    "redimensionalize_state",
    "RefinedNetwork",
    "check_window",
    "refine_graph",
    "segment_count",
    "NoiseSpec",
    "average_boundary",
    "inject_noise",
    "simulate_network",
    "simulation_diagnostics",
    "steady_state_solve",
    "transient_simulate",
    "KnownBoundaries",
    "MeasurementSet",
    "ProfileSet",
    "TimeGrid",
    "read_measurements",
    "read_profiles",
    "resample_periodic",
    "write_measurements",
    "write_profiles",
    "__version__",
]
