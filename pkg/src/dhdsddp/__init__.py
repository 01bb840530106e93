"""Solver for convex polyhedral multistage stochastic control problems in
decision-hazard-decision form, with SDDP over an N-dimensional state and an
extensive-form oracle for verification."""

__version__ = "0.1.0"

from .model import (
    DhdProblem,
    Dims,
    MarkovLattice,
    NoiseModel,
    StageRealization,
    TerminalFunction,
    SchemaError,
    load_problem,
    serialize,
    scenario_weights,
    validate,
)
from .lp import LinearProgram, LpSolution, solve as solve_lp, check_certificate
from .cuts import Cut, CutStore, initialize, evaluate, add_cut, cuts_to_json, cuts_from_json
from .stage import (
    StageSolution,
    StageInfeasibleError,
    StageUnboundedError,
    build_two_stage,
    solve_stage,
    solve_recourse,
)
from .engine import (
    EngineConfig,
    SolveReport,
    Trajectory,
    backward_pass,
    forward_pass,
    lower_bound,
    make_rng,
    run,
    simulate_policy,
)
from .oracle import (
    TreeTooLargeError,
    InfeasibleStateError,
    build_extensive_form,
    build_scenario_tree,
    check_hd_reformulation,
    exact_value,
    exact_values,
)
