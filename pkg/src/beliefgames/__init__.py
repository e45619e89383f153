"""Solver and simulation toolkit for finite-horizon dynamic games with
asymmetric information: exact Bayesian belief filtering, equilibrium
computation by backward fixed-point recursion, cascade analysis, and the
binary investment game specialization."""

__version__ = "0.1.0"

from .beliefs import (
    ImpossibleObservationError,
    JointPublicBelief,
    Prescription,
    PublicBelief,
    canonical_id,
    constant_prescription,
    joint_public_update,
    make_prescription,
    mean_belief,
    point_mass,
    private_kernel,
    private_update,
    public_update,
    simplex_grid,
)
from .cascades import (
    CascadeCheck,
    check_equivalence,
    is_cascading_belief,
    is_cascading_history,
)
from .game import GameSpec, reward_lookup, validate_spec
from .investment import (
    InvestmentParams,
    build_spec,
    cascade_value,
    drift,
    hat_xi,
    in_analytic_cascade,
    monte_carlo,
    scalar_update,
)
from .solver import (
    BudgetError,
    EquilibriumRule,
    FixedPointError,
    ForwardProfile,
    SolverConfig,
    SolverError,
    UnsolvedHistoryError,
    backward_solve,
    forward_construct,
    root_from_priors,
    solve_stage,
    stage_payoff,
    verify_equilibrium,
)
from .specfile import (
    ParsedSpec,
    SpecFileError,
    format_spec,
    parse_spec_file,
    parse_spec_text,
    write_spec_file,
)
