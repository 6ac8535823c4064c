"""Iterative LQ solver: repeated approximation, LQ solve, damped update.

Each outer iteration (1) builds the LQ model of the game about the current
operating point, (2) solves it for feedback-Nash strategies, and (3) rolls
the new strategies out against the current operating point, backtracking on
the feedforward scale until the rollout is finite and the total cost over
all players does not increase beyond a small slack. Convergence is declared
on the operating point itself: the max-norm state change between successive
iterations dropping below the tolerance. Player costs need not decrease
monotonically toward a Nash point, so cost is only used as a step-acceptance
guard, never as the convergence signal.

Non-convergence (iteration cap, or no acceptable step at any scale) is a
result state, not an exception.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .approximation import lq_approximate, provider_from_mode
from .errors import DivergedRolloutError, GameDefinitionError
from .game import GameProblem, SystemTrajectory, open_loop_rollout, rollout, trajectory_cost
from .lq_solver import solve_lq_game


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs of the outer loop.

    Attributes:
        max_iterations: outer-iteration cap.
        convergence_tolerance: max-norm state-trajectory change below which
            the solve is converged.
        initial_step_scale: first feedforward scale tried each iteration
            (must be in (0, 1]).
        step_backtrack_factor: multiplicative backtracking factor in (0, 1).
        min_step_scale: smallest feedforward scale tried.
        cost_increase_slack: relative slack of the acceptance rule; a step
            is acceptable when the summed player cost does not exceed
            ``previous + slack * (1 + |previous|)``.
        max_state_deviation: optional additional backtrack trigger; when
            set, a step is rejected if any state deviates from the
            reference by more than this (max-norm).
        mode: derivative mode, ``"manual"``/``"md"`` or ``"automatic"``/``"ad"``.
    """

    max_iterations: int = 100
    convergence_tolerance: float = 1e-4
    initial_step_scale: float = 1.0
    step_backtrack_factor: float = 0.5
    min_step_scale: float = 1.0 / 64.0
    cost_increase_slack: float = 1e-3
    max_state_deviation: float | None = None
    mode: str = "manual"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise GameDefinitionError("max_iterations must be >= 1")
        if self.convergence_tolerance <= 0:
            raise GameDefinitionError("convergence_tolerance must be > 0")
        if not 0 < self.initial_step_scale <= 1:
            raise GameDefinitionError("initial_step_scale must be in (0, 1]")
        if not 0 < self.step_backtrack_factor < 1:
            raise GameDefinitionError("step_backtrack_factor must be in (0, 1)")
        if not 0 < self.min_step_scale <= self.initial_step_scale:
            raise GameDefinitionError(
                "min_step_scale must be in (0, initial_step_scale]"
            )
        if self.cost_increase_slack < 0:
            raise GameDefinitionError("cost_increase_slack must be >= 0")
        if self.max_state_deviation is not None and self.max_state_deviation <= 0:
            raise GameDefinitionError("max_state_deviation must be > 0")


@dataclass(frozen=True)
class IterationDiagnostic:
    """Per-iteration record emitted by the solver."""

    iteration: int
    step_scale: float | None
    trajectory_change: float
    player_costs: np.ndarray
    social_cost: float
    accepted: bool


@dataclass
class SolveResult:
    """Outcome of an iterative solve.

    The trajectory is always dynamically feasible and ``player_costs``
    equals ``trajectory_cost`` of it. ``wall_time_ms`` is measurement
    metadata and is excluded from determinism guarantees.
    """

    strategies: list
    trajectory: SystemTrajectory
    player_costs: np.ndarray
    converged: bool
    iterations: int
    diagnostics: list = field(default_factory=list)
    termination: str = ""
    wall_time_ms: float = 0.0


def _initial_trajectory(problem, x0, initial_trajectory, initial_strategies):
    if initial_trajectory is not None:
        return initial_trajectory
    if x0 is None:
        raise GameDefinitionError(
            "solve needs an initial state x0 or an initial trajectory"
        )
    if initial_strategies is not None:
        reference = SystemTrajectory(
            np.zeros((problem.horizon + 1, problem.state_dim)),
            np.zeros((problem.horizon, problem.control_dim)),
            problem.dt,
        )
        return rollout(problem, initial_strategies, reference, step_scale=1.0, x0=x0)
    return open_loop_rollout(problem, x0)


def solve(problem: GameProblem, x0=None, initial_trajectory=None,
          initial_strategies=None, config: SolverConfig | None = None,
          on_iteration=None) -> SolveResult:
    """Approximate a feedback-Nash equilibrium of a nonlinear game.

    Args:
        problem: the game definition.
        x0: initial joint state (required unless ``initial_trajectory`` is
            given).
        initial_trajectory: optional warm-start operating point.
        initial_strategies: optional initial strategies; rolled out about a
            zero reference from ``x0`` to produce the first operating point.
            Default is zero strategies, i.e. a zero-control rollout.
        config: solver configuration (defaults to :class:`SolverConfig()`).
        on_iteration: optional callback receiving each
            :class:`IterationDiagnostic` as it is produced.

    Returns:
        A :class:`SolveResult`; non-convergence is reported in its flags,
        never raised.
    """
    config = config or SolverConfig()
    provider = provider_from_mode(config.mode)
    start = time.perf_counter()

    current = _initial_trajectory(problem, x0, initial_trajectory, initial_strategies)
    costs = trajectory_cost(problem, current)
    social = float(np.sum(costs))

    diagnostics = []
    strategies = None
    converged = False
    termination = "iteration cap reached"
    iterations = 0

    for iteration in range(1, config.max_iterations + 1):
        iterations = iteration
        approx = lq_approximate(problem, current, provider)
        strategies = solve_lq_game(approx)

        candidate = None
        cand_costs = None
        scale = config.initial_step_scale
        slack = config.cost_increase_slack * (1.0 + abs(social))
        while scale >= config.min_step_scale * (1.0 - 1e-12):
            try:
                trial = rollout(problem, strategies, current, step_scale=scale)
            except DivergedRolloutError:
                scale *= config.step_backtrack_factor
                continue
            trial_costs = trajectory_cost(problem, trial)
            trial_social = float(np.sum(trial_costs))
            if not np.isfinite(trial_social):
                scale *= config.step_backtrack_factor
                continue
            if config.max_state_deviation is not None:
                deviation = float(np.max(np.abs(trial.states - current.states)))
                if deviation > config.max_state_deviation:
                    scale *= config.step_backtrack_factor
                    continue
            if trial_social <= social + slack:
                candidate, cand_costs = trial, trial_costs
                break
            scale *= config.step_backtrack_factor

        if candidate is None:
            diag = IterationDiagnostic(
                iteration, None, float("inf"), costs.copy(), social, False
            )
            diagnostics.append(diag)
            if on_iteration:
                on_iteration(diag)
            termination = "no acceptable step at any scale"
            break

        change = float(np.max(np.abs(candidate.states - current.states)))
        current, costs = candidate, cand_costs
        social = float(np.sum(costs))
        diag = IterationDiagnostic(iteration, scale, change, costs.copy(), social, True)
        diagnostics.append(diag)
        if on_iteration:
            on_iteration(diag)

        if change < config.convergence_tolerance:
            converged = True
            termination = "trajectory change below tolerance"
            break

    elapsed_ms = (time.perf_counter() - start) * 1e3
    return SolveResult(
        strategies=strategies,
        trajectory=current,
        player_costs=costs,
        converged=converged,
        iterations=iterations,
        diagnostics=diagnostics,
        termination=termination,
        wall_time_ms=elapsed_ms,
    )


def receding_horizon_step(problem: GameProblem, previous: SolveResult,
                          new_initial_state, config: SolverConfig | None = None,
                          on_iteration=None) -> SolveResult:
    """Warm-started re-solve from a new initial state.

    Shifts the previous strategies and operating point one timestep
    (repeating the final stage), rolls the shifted strategies out from
    ``new_initial_state``, and solves from that warm start. Re-solving from
    an unchanged initial state skips the shift, since no time has passed.
    """
    new_initial_state = np.asarray(new_initial_state, dtype=float)
    if new_initial_state.shape != (problem.state_dim,):
        raise GameDefinitionError(
            f"initial state has shape {new_initial_state.shape}, expected "
            f"({problem.state_dim},)"
        )
    if previous.strategies is None or previous.trajectory.horizon != problem.horizon:
        raise GameDefinitionError("previous result does not match the problem shape")

    if np.array_equal(new_initial_state, previous.trajectory.states[0]):
        strategies = previous.strategies
        reference = previous.trajectory
    else:
        strategies = [s.shifted() for s in previous.strategies]
        reference = SystemTrajectory(
            np.concatenate([previous.trajectory.states[1:],
                            previous.trajectory.states[-1:]]),
            np.concatenate([previous.trajectory.controls[1:],
                            previous.trajectory.controls[-1:]]),
            problem.dt,
        )
    try:
        warm = rollout(problem, strategies, reference, step_scale=1.0,
                       x0=new_initial_state)
    except DivergedRolloutError:
        warm = open_loop_rollout(problem, new_initial_state)
    return solve(problem, initial_trajectory=warm, config=config,
                 on_iteration=on_iteration)
