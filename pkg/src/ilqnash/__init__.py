"""ilqnash: feedback-Nash solutions of N-player differential games.

Define coupled dynamics and per-player costs, then approximate a feedback
Nash equilibrium with the iterative linear-quadratic method: linearize the
discrete dynamics and quadraticize the costs about the current operating
point, solve the resulting LQ game exactly by backward dynamic programming,
and update the operating point with a damped strategy step until the
trajectory stabilizes.

Control-law sign convention used everywhere:
``u_i,t = u_ref_i,t - P_i,t (x_t - x_ref_t) - scale * alpha_i,t``.
"""

from .approximation import (
    AutomaticDifferentiation,
    DerivativeProvider,
    LinearDynamics,
    LQApproximation,
    ManualDifferentiation,
    QuadraticPlayerCost,
    floor_spectrum,
    linearize_dynamics,
    lq_approximate,
    provider_from_mode,
    quadraticize_costs,
)
from .costs import (
    CompositeCost,
    ControlEffortCost,
    CostTerm,
    GoalCost,
    PlayerCost,
    ProximityCost,
    QuadraticStateCost,
    SoftBoundCost,
    goal_cost,
    input_cost,
    proximity_cost,
)
from .document import (
    TrajectoryDocument,
    document_from_result,
    read_document,
    write_document,
    write_plot_data,
    write_svg,
)
from .dynamics import (
    ControlPartition,
    DynamicsModel,
    LinearSystemModel,
    ProductSystem,
    UnicycleModel,
)
from .errors import (
    CostDerivativeError,
    DivergedRolloutError,
    DocumentFormatError,
    GameDefinitionError,
    NumericalError,
    ScenarioConfigError,
    SingularStageError,
)
from .game import (
    GameProblem,
    SystemTrajectory,
    discretize_step,
    evaluate_dynamics,
    feasibility_error,
    open_loop_rollout,
    rollout,
    trajectory_cost,
)
from .lq_solver import ValueFunctionQuadratic, best_response, solve_lq_game
from .scenarios import (
    ScenarioDefinition,
    build_scenario,
    load_scenario,
    load_scenario_config,
    make_freespace_5p,
    make_hallway_3p,
    make_lq_benchmark,
)
from .solver import (
    IterationDiagnostic,
    SolveResult,
    SolverConfig,
    receding_horizon_step,
    solve,
)
from .strategies import AffineStrategy, zero_strategies

__version__ = "0.1.0"

__all__ = [
    "AffineStrategy",
    "AutomaticDifferentiation",
    "CompositeCost",
    "ControlEffortCost",
    "ControlPartition",
    "CostDerivativeError",
    "CostTerm",
    "DerivativeProvider",
    "DivergedRolloutError",
    "DocumentFormatError",
    "DynamicsModel",
    "GameDefinitionError",
    "GameProblem",
    "GoalCost",
    "IterationDiagnostic",
    "LQApproximation",
    "LinearDynamics",
    "LinearSystemModel",
    "ManualDifferentiation",
    "NumericalError",
    "PlayerCost",
    "ProductSystem",
    "ProximityCost",
    "QuadraticPlayerCost",
    "QuadraticStateCost",
    "ScenarioConfigError",
    "ScenarioDefinition",
    "SingularStageError",
    "SoftBoundCost",
    "SolveResult",
    "SolverConfig",
    "SystemTrajectory",
    "TrajectoryDocument",
    "UnicycleModel",
    "ValueFunctionQuadratic",
    "best_response",
    "build_scenario",
    "discretize_step",
    "document_from_result",
    "evaluate_dynamics",
    "feasibility_error",
    "floor_spectrum",
    "goal_cost",
    "input_cost",
    "linearize_dynamics",
    "load_scenario",
    "load_scenario_config",
    "lq_approximate",
    "make_freespace_5p",
    "make_hallway_3p",
    "make_lq_benchmark",
    "open_loop_rollout",
    "provider_from_mode",
    "proximity_cost",
    "quadraticize_costs",
    "read_document",
    "receding_horizon_step",
    "rollout",
    "solve",
    "solve_lq_game",
    "trajectory_cost",
    "write_document",
    "write_plot_data",
    "write_svg",
    "zero_strategies",
]
