"""Game definition, trajectories, rollouts, and trajectory costs.

A :class:`GameProblem` bundles dynamics, one cost per player, horizon, and
timestep. A :class:`SystemTrajectory` is the operating point of the
iterative solver: states ``x_0..x_T`` and stacked controls ``u_0..u_{T-1}``
at the problem's fixed timestep. Stage costs are integrated as
``sum_t g_i(x_t, u_t, t) * dt + g_i^T(x_T)`` so refining the timestep does
not rescale the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, integration
from .dynamics import DynamicsModel, ProductSystem, UnicycleModel
from .errors import DivergedRolloutError, GameDefinitionError, NumericalError
from .strategies import stack_gains, zero_strategies

FEASIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class GameProblem:
    """Immutable definition of a finite-horizon N-player differential game.

    Attributes:
        dynamics: joint dynamics model.
        costs: one :class:`~ilqnash.costs.PlayerCost` per player.
        horizon: number of timesteps ``T`` (> 0); the game runs ``T * dt``
            seconds with ``T + 1`` states.
        dt: timestep in seconds (> 0).
        integrator: ``"rk4"`` (default) or ``"euler"``; used consistently by
            rollouts and by the LQ approximation.
    """

    dynamics: DynamicsModel
    costs: list = field(default_factory=list)
    horizon: int = 100
    dt: float = 0.1
    integrator: str = "rk4"

    def __post_init__(self):
        if self.horizon <= 0 or int(self.horizon) != self.horizon:
            raise GameDefinitionError(f"horizon must be a positive integer, got {self.horizon}")
        if self.dt <= 0:
            raise GameDefinitionError(f"timestep must be positive, got {self.dt}")
        if self.integrator not in integration.INTEGRATORS:
            raise GameDefinitionError(
                f"unknown integrator '{self.integrator}', expected one of "
                f"{integration.INTEGRATORS}"
            )
        if len(self.costs) != self.dynamics.num_players:
            raise GameDefinitionError(
                f"got {len(self.costs)} player costs for "
                f"{self.dynamics.num_players} players"
            )
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "costs", list(self.costs))

    @property
    def num_players(self) -> int:
        return self.dynamics.num_players

    @property
    def state_dim(self) -> int:
        return self.dynamics.state_dim

    @property
    def control_dim(self) -> int:
        return self.dynamics.control_dim

    @property
    def control_dims(self):
        return self.dynamics.control_dims

    @property
    def duration(self) -> float:
        return self.horizon * self.dt

    @property
    def partition(self):
        return self.dynamics.partition

    def stage_times(self):
        return self.dt * np.arange(self.horizon)


@dataclass
class SystemTrajectory:
    """Time-indexed operating point: ``T + 1`` states and ``T`` stacked controls.

    Attributes:
        states: shape ``(T + 1, n)``.
        controls: shape ``(T, m)``, players stacked by the control partition.
        dt: timestep in seconds.
    """

    states: np.ndarray
    controls: np.ndarray
    dt: float

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise GameDefinitionError("trajectory arrays must be 2-D")
        if self.states.shape[0] != self.controls.shape[0] + 1:
            raise GameDefinitionError(
                f"{self.states.shape[0]} states require "
                f"{self.states.shape[0] - 1} controls, got {self.controls.shape[0]}"
            )
        if self.dt <= 0:
            raise GameDefinitionError(f"timestep must be positive, got {self.dt}")

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def initial_state(self):
        return self.states[0]

    def times(self):
        return self.dt * np.arange(self.horizon + 1)

    def player_controls(self, problem: GameProblem, i: int):
        """Controls of 0-based player ``i``, shape ``(T, m_i)``."""
        return self.controls[:, problem.partition.slices[i]]

    def copy(self) -> "SystemTrajectory":
        return SystemTrajectory(self.states.copy(), self.controls.copy(), self.dt)


def _check_shapes(problem: GameProblem, traj: SystemTrajectory):
    if traj.horizon != problem.horizon:
        raise GameDefinitionError(
            f"trajectory horizon {traj.horizon} does not match problem horizon "
            f"{problem.horizon}"
        )
    if traj.states.shape[1] != problem.state_dim:
        raise GameDefinitionError(
            f"trajectory state dimension {traj.states.shape[1]} does not match "
            f"problem dimension {problem.state_dim}"
        )
    if traj.controls.shape[1] != problem.control_dim:
        raise GameDefinitionError(
            f"trajectory control dimension {traj.controls.shape[1]} does not "
            f"match problem dimension {problem.control_dim}"
        )


def evaluate_dynamics(model: DynamicsModel, x, us, t=0.0):
    """Evaluate the continuous vector field with dimension checks."""
    x, us = model.validate_point(x, us)
    xdot = np.asarray(model.vector_field(x, us, t), dtype=float)
    if xdot.shape != (model.state_dim,):
        raise GameDefinitionError(
            f"vector field returned shape {xdot.shape}, expected ({model.state_dim},)"
        )
    return xdot


def discretize_step(model: DynamicsModel, x, us, t, dt, method="rk4"):
    """Advance one timestep with the chosen integrator (default RK4, ZOH controls)."""
    x, us = model.validate_point(x, us)
    x_next = integration.step_point(model, x, us, t, dt, method)
    if not np.all(np.isfinite(x_next)):
        raise NumericalError(f"integration produced a non-finite state at t = {t}")
    return x_next


def rollout(problem: GameProblem, strategies, reference: SystemTrajectory,
            step_scale: float = 1.0, x0=None) -> SystemTrajectory:
    """Forward-simulate the affine control law about a reference trajectory.

    Applies ``u_i,t = u_ref_i,t - P_i,t (x_t - x_ref_t) - step_scale * alpha_i,t``
    and steps with the problem's integrator, so the result is dynamically
    feasible by construction.

    Args:
        problem: the game.
        strategies: one :class:`~ilqnash.strategies.AffineStrategy` per player.
        reference: the operating point ``(x_ref, u_ref)``.
        step_scale: feedforward scale in ``(0, 1]`` (0 is accepted and
            disables the feedforward term entirely).
        x0: optional replacement initial state (defaults to the reference's).

    Raises:
        DivergedRolloutError: a non-finite state or control appeared; the
            exception carries the first offending timestep.
    """
    _check_shapes(problem, reference)
    if len(strategies) != problem.num_players:
        raise GameDefinitionError(
            f"got {len(strategies)} strategies for {problem.num_players} players"
        )
    for i, s in enumerate(strategies):
        if s.horizon != problem.horizon or s.P.shape[2] != problem.state_dim:
            raise GameDefinitionError(
                f"strategy of player {i + 1} has shape {s.P.shape}, expected "
                f"({problem.horizon}, {problem.control_dims[i]}, {problem.state_dim})"
            )
    if not 0.0 <= step_scale <= 1.0:
        raise GameDefinitionError(f"step scale must be in [0, 1], got {step_scale}")

    P, alpha = stack_gains(strategies)
    T, n = problem.horizon, problem.state_dim
    model, dt, method = problem.dynamics, problem.dt, problem.integrator
    start = np.ascontiguousarray(
        reference.states[0] if x0 is None else np.asarray(x0, dtype=float)
    )

    if _kernels.NUMBA_AVAILABLE and isinstance(model, ProductSystem) \
            and all(isinstance(s, UnicycleModel) for s in model.subsystems):
        with np.errstate(over="ignore", invalid="ignore"):
            states, controls, fail = _kernels.unicycle_product_rollout(
                start, np.ascontiguousarray(reference.states),
                np.ascontiguousarray(reference.controls),
                P, alpha, float(step_scale), dt, method == "rk4",
            )
        if fail >= 0:
            raise DivergedRolloutError(int(fail))
        return SystemTrajectory(states, controls, dt)

    states = np.empty((T + 1, n))
    controls = np.empty((T, problem.control_dim))
    states[0] = start
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            u = reference.controls[t] - P[t] @ (states[t] - reference.states[t]) \
                - step_scale * alpha[t]
            controls[t] = u
            x = integration.step_batch(
                model, states[t][None, :], u[None, :], np.array([t * dt]), dt, method
            )
            states[t + 1] = x[0]
            if not np.all(np.isfinite(states[t + 1])):
                raise DivergedRolloutError(t)
    return SystemTrajectory(states, controls, dt)


def open_loop_rollout(problem: GameProblem, x0, controls=None) -> SystemTrajectory:
    """Simulate a fixed (default all-zero) control sequence from ``x0``."""
    T = problem.horizon
    if controls is None:
        controls = np.zeros((T, problem.control_dim))
    reference = SystemTrajectory(
        np.zeros((T + 1, problem.state_dim)), np.asarray(controls, dtype=float), problem.dt
    )
    return rollout(problem, zero_strategies(T, problem.state_dim, problem.control_dims),
                   reference, step_scale=1.0, x0=x0)


def trajectory_cost(problem: GameProblem, traj: SystemTrajectory) -> np.ndarray:
    """Per-player total cost: dt-scaled stage sum plus terminal cost."""
    _check_shapes(problem, traj)
    xs, us = traj.states[:-1], traj.controls
    ts = problem.stage_times()
    totals = np.empty(problem.num_players)
    split = problem.partition.split
    for i, cost in enumerate(problem.costs):
        if hasattr(cost, "stage_batch"):
            stage = float(np.sum(cost.stage_batch(xs, us, ts)))
        else:
            stage = float(sum(cost.stage(xs[t], split(us[t]), ts[t]) for t in range(traj.horizon)))
        totals[i] = stage * problem.dt + cost.terminal(traj.states[-1])
    return totals


def feasibility_error(problem: GameProblem, traj: SystemTrajectory) -> float:
    """Max-abs defect of ``x_{t+1} = step(x_t, u_t, t)`` over the horizon.

    A trajectory is dynamically feasible when this is below
    ``FEASIBILITY_TOL`` (1e-10).
    """
    _check_shapes(problem, traj)
    stepped = integration.step_batch(
        problem.dynamics, traj.states[:-1], traj.controls, problem.stage_times(),
        problem.dt, problem.integrator,
    )
    return float(np.max(np.abs(stepped - traj.states[1:])))
