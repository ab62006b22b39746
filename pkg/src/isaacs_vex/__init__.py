"""Value-function solver for zero-sum stochastic differential games with
one-sided incomplete information: backward quadrature scheme with per-step
convexification in the belief simplex, plus belief-martingale simulation."""

from .belief import BeliefPath, KernelNode, dpp_residual, kernel_from_split, simulate_beliefs
from .convexify import EnvelopeSplit, SplitNode, is_discretely_convex, vex
from .errors import (
    DivergedField,
    InconsistentSplit,
    IsaacsVexError,
    MissingArtifacts,
    NonFiniteCoefficient,
    NonFiniteInput,
    ParseError,
    SingularSigma,
    UnknownProblem,
    UnsupportedG,
    ValidationError,
)
from .grids import (
    Grids,
    SimplexGrid,
    SpaceGrid,
    TimeGrid,
    ValueField,
    build_grids,
    interpolate,
    simplex_nodes,
)
from .hamiltonian import GrowthReport, HamiltonianValue, check_growth, ham
from .model import (
    Bounds,
    GameSpec,
    ProblemConfig,
    builtin_config,
    builtin_names,
    builtin_problem,
    config_from_dict,
    load_config,
)
from .quadrature import (
    GHRule,
    StepExpectation,
    gaussian_tail_moment,
    gh_rule,
    step_expectation,
    tree_sum,
)
from .reference import envelope_oracle, heat_closed_form, mc_step_expectation
from .scheme import (
    SolveReport,
    SolveResult,
    backward_step,
    diagnostics,
    solve,
    terminal_slice,
)

__version__ = "0.1.0"

__all__ = [
    "BeliefPath", "Bounds", "DivergedField", "EnvelopeSplit", "GHRule",
    "GameSpec", "Grids", "GrowthReport", "HamiltonianValue",
    "InconsistentSplit", "IsaacsVexError", "KernelNode", "MissingArtifacts",
    "NonFiniteCoefficient", "NonFiniteInput", "ParseError", "ProblemConfig",
    "SimplexGrid", "SingularSigma", "SolveReport", "SolveResult",
    "SpaceGrid", "SplitNode", "StepExpectation", "TimeGrid", "UnknownProblem",
    "UnsupportedG", "ValidationError", "ValueField", "backward_step",
    "builtin_config", "builtin_names", "builtin_problem", "check_growth",
    "config_from_dict", "diagnostics", "dpp_residual", "envelope_oracle",
    "gaussian_tail_moment", "gh_rule", "ham", "heat_closed_form",
    "interpolate", "is_discretely_convex", "kernel_from_split", "load_config",
    "mc_step_expectation", "simplex_nodes", "simulate_beliefs", "solve",
    "step_expectation", "terminal_slice", "tree_sum", "vex",
]
