"""Boundary-controlled transport in L2: exact rollouts, weak-norm operator
machinery, lattice value estimation, and viscosity-inequality verification."""

from .config import ExperimentConfig, default_config, parse_config
from .controls import ControlBounds, ControlPath
from .costs import (
    CostAuditReport,
    RunningCost,
    boundary_effort_cost,
    clipped_weak_energy_cost,
    constant_cost,
    unclipped_l2_cost,
    validate_cost,
)
from .dynamics import (
    ConvergenceReport,
    Trajectory,
    closed_form_state,
    convergence_report,
    small_time_bound,
    solve_mollified,
    solve_transport,
    state_deviation,
    step_states,
    transport_shift,
)
from .errors import (
    AlignmentError,
    BudgetError,
    ConfigError,
    CostRejectedError,
    DomainError,
    GridMismatchError,
    HorizonError,
    OperatorConstructionError,
    ResolutionError,
    TransportHJBError,
)
from .grid import (
    GridFunction,
    GridSpec,
    dq_energy,
    dq_pairing,
    h1_seminorm,
    in_domain_a,
    in_domain_astar,
    inner_product,
    l2_norm,
    require_domain_a,
    require_domain_astar,
    sup_norm,
)
from .hjb import (
    RADIAL_QUADRATIC,
    RADIAL_SOFT,
    ComparisonReport,
    ExtremumReport,
    GradientRangeReport,
    HamiltonianResult,
    RateCheckReport,
    SearchSettings,
    Test1Function,
    Test2Function,
    ViscosityReport,
    add_localized_bump,
    comparison_probe,
    default_directions,
    gradient_range_check,
    hamiltonian,
    locate_extremum,
    lyapunov_identity_residual,
    rate_probe_instance,
    seed_states,
    subsolution_residual,
    supersolution_residual,
    test1_domain_audit,
    test1_rate_check,
    test2_rate_check,
    trace_free_state,
)
from .operators import (
    DominationReport,
    OperatorMatrix,
    WeakNormFactorization,
    adjoint_defect_corner_model,
    adjoint_generator_matrix,
    apply_adjoint_generator,
    apply_generator,
    boundary_mollifier,
    boundary_trace,
    build_weak_norm,
    check_adjoint_domination,
    drift_of_weak_norm,
    generator_matrix,
    inflow_decay_profile,
    mollified_injection,
    mollified_trace,
    resolvent_adjoint,
    resolvent_adjoint_matrix,
    resolvent_generator,
    resolvent_generator_matrix,
    trace_norm_of_weak_norm,
    weak_norm_kernel,
)
from .problem import ProblemSpec
from .props import run_props
from .reporting import RunSummary, read_state, write_state
from .value import (
    DEFAULT_BUDGET,
    BellmanReport,
    GronwallReport,
    LatticeSpec,
    LipschitzProbeRow,
    ValueEstimate,
    ValueEvaluator,
    bellman_report,
    bellman_residual,
    discount_step_weights,
    estimate_value,
    lattice_path,
    random_lattice_path,
    trajectory_gronwall_report,
    value_lipschitz_probe,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BellmanReport",
    "BudgetError",
    "ComparisonReport",
    "ConfigError",
    "ControlBounds",
    "ControlPath",
    "ConvergenceReport",
    "CostAuditReport",
    "CostRejectedError",
    "DEFAULT_BUDGET",
    "DomainError",
    "DominationReport",
    "ExperimentConfig",
    "ExtremumReport",
    "GradientRangeReport",
    "GridFunction",
    "GridMismatchError",
    "GridSpec",
    "GronwallReport",
    "HamiltonianResult",
    "HorizonError",
    "LatticeSpec",
    "LipschitzProbeRow",
    "OperatorConstructionError",
    "OperatorMatrix",
    "ProblemSpec",
    "RADIAL_QUADRATIC",
    "RADIAL_SOFT",
    "RateCheckReport",
    "ResolutionError",
    "RunSummary",
    "RunningCost",
    "SearchSettings",
    "Test1Function",
    "Test2Function",
    "Trajectory",
    "TransportHJBError",
    "ValueEstimate",
    "ValueEvaluator",
    "ViscosityReport",
    "WeakNormFactorization",
    "add_localized_bump",
    "adjoint_defect_corner_model",
    "adjoint_generator_matrix",
    "apply_adjoint_generator",
    "apply_generator",
    "bellman_report",
    "bellman_residual",
    "boundary_effort_cost",
    "boundary_mollifier",
    "boundary_trace",
    "build_weak_norm",
    "check_adjoint_domination",
    "clipped_weak_energy_cost",
    "closed_form_state",
    "comparison_probe",
    "constant_cost",
    "convergence_report",
    "default_config",
    "default_directions",
    "discount_step_weights",
    "dq_energy",
    "dq_pairing",
    "drift_of_weak_norm",
    "estimate_value",
    "generator_matrix",
    "gradient_range_check",
    "h1_seminorm",
    "hamiltonian",
    "in_domain_a",
    "in_domain_astar",
    "inflow_decay_profile",
    "inner_product",
    "l2_norm",
    "lattice_path",
    "locate_extremum",
    "lyapunov_identity_residual",
    "mollified_injection",
    "mollified_trace",
    "parse_config",
    "random_lattice_path",
    "rate_probe_instance",
    "read_state",
    "require_domain_a",
    "require_domain_astar",
    "resolvent_adjoint",
    "resolvent_adjoint_matrix",
    "resolvent_generator",
    "resolvent_generator_matrix",
    "run_props",
    "seed_states",
    "small_time_bound",
    "solve_mollified",
    "solve_transport",
    "state_deviation",
    "step_states",
    "subsolution_residual",
    "sup_norm",
    "supersolution_residual",
    "test1_domain_audit",
    "test1_rate_check",
    "test2_rate_check",
    "trace_free_state",
    "trace_norm_of_weak_norm",
    "trajectory_gronwall_report",
    "transport_shift",
    "unclipped_l2_cost",
    "validate_cost",
    "value_lipschitz_probe",
    "weak_norm_kernel",
    "write_state",
]
