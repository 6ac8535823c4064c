"""Built-in benchmark scenarios and their config-file loader.

Three scenarios ship with the library, each defined by a YAML config under
``ilqnash/configs/``:

* ``lq2p2d`` — minimal LQ game: two players push a shared 2-state linear
  system (position/velocity) toward different position targets.
* ``hallway3`` — three unicycles cross a corridor in opposing directions
  while swapping lanes, with wall penalties.
* ``freespace5`` — five unicycles on a circle swap to antipodal goals.

Config files are human-readable key-value documents; the schema is
validated with explicit errors (see README for the field reference). All
numeric geometry (weights, radii, goal placements) is fixed by these files
and serves as the regression baseline for the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .costs import (
    CompositeCost,
    ControlEffortCost,
    GoalCost,
    ProximityCost,
    QuadraticStateCost,
    SoftBoundCost,
)
from .dynamics import LinearSystemModel, ProductSystem, UnicycleModel
from .errors import GameDefinitionError, ScenarioConfigError
from .game import GameProblem
from .solver import SolverConfig

BUILTIN_SCENARIOS = ("lq2p2d", "hallway3", "freespace5")

_KINDS = ("unicycle", "linear_quadratic")


@dataclass
class ScenarioDefinition:
    """A named, fully specified game plus its evaluation metadata.

    Two definitions compare equal iff they were built from the same config
    (same name, parameters, and initial state).
    """

    name: str
    problem: GameProblem
    initial_state: np.ndarray
    solver: SolverConfig
    config: dict
    collision_threshold: float | None = None
    goals: list | None = None
    corridor: tuple | None = None
    position_indices: list | None = None
    goal_tolerance: float | None = None
    jitter: float = 0.0
    jitter_indices: list = field(default_factory=list)

    def __eq__(self, other):
        return (
            isinstance(other, ScenarioDefinition)
            and self.name == other.name
            and self.config == other.config
            and np.array_equal(self.initial_state, other.initial_state)
        )

    def jittered_initial_state(self, rng) -> np.ndarray:
        """Canonical initial state with uniform position jitter applied.

        The jitter half-width comes from the config (``initial_jitter``);
        it perturbs each player's position coordinates independently.
        """
        x0 = self.initial_state.copy()
        if self.jitter > 0 and self.jitter_indices:
            x0[self.jitter_indices] += rng.uniform(
                -self.jitter, self.jitter, size=len(self.jitter_indices)
            )
        return x0

    def min_pairwise_distance(self, trajectory) -> float:
        """Smallest planar inter-player distance along a trajectory."""
        if not self.position_indices:
            raise GameDefinitionError(
                f"scenario '{self.name}' has no planar player positions"
            )
        dmin = math.inf
        pos = [trajectory.states[:, list(idx)] for idx in self.position_indices]
        for a in range(len(pos)):
            for b in range(a + 1, len(pos)):
                e = pos[a] - pos[b]
                dmin = min(dmin, float(np.min(np.hypot(e[:, 0], e[:, 1]))))
        return dmin

    def final_goal_distances(self, trajectory) -> np.ndarray:
        """Per-player distance between the final position and the goal."""
        if not (self.position_indices and self.goals):
            raise GameDefinitionError(
                f"scenario '{self.name}' has no positional goals"
            )
        xT = trajectory.states[-1]
        return np.array(
            [
                float(np.hypot(*(xT[list(idx)] - np.asarray(goal))))
                for idx, goal in zip(self.position_indices, self.goals)
            ]
        )


# -- config loading -----------------------------------------------------------


def _fail(label, msg):
    raise ScenarioConfigError(f"{label}: {msg}")


def _require(cfg, key, label, types=None):
    if key not in cfg:
        _fail(label, f"missing required key '{key}'")
    value = cfg[key]
    if types is not None and not isinstance(value, types):
        _fail(label, f"key '{key}' has type {type(value).__name__}, "
                     f"expected {'/'.join(t.__name__ for t in types)}")
    return value


def _positive(value, key, label, strict=True):
    try:
        value = float(value)
    except (TypeError, ValueError):
        _fail(label, f"key '{key}' must be numeric, got {value!r}")
    if strict and value <= 0:
        _fail(label, f"key '{key}' must be > 0, got {value}")
    if not strict and value < 0:
        _fail(label, f"key '{key}' must be >= 0, got {value}")
    return value


def validate_scenario_config(cfg: dict, label: str = "scenario config") -> dict:
    """Validate a parsed scenario config; returns it unchanged on success."""
    if not isinstance(cfg, dict):
        _fail(label, "top level must be a mapping")
    name = _require(cfg, "name", label, (str,))
    kind = _require(cfg, "kind", label, (str,))
    if kind not in _KINDS:
        _fail(label, f"unknown kind '{kind}', expected one of {_KINDS}")
    horizon = _require(cfg, "horizon", label, (int,))
    if horizon <= 0:
        _fail(label, f"horizon must be a positive integer, got {horizon}")
    _positive(_require(cfg, "dt", label), "dt", label)
    players = _require(cfg, "players", label, (list,))
    if not players:
        _fail(label, "at least one player is required")

    if kind == "unicycle":
        prox = _require(cfg, "proximity", label, (dict,))
        _positive(_require(prox, "radius", label), "proximity.radius", label)
        _positive(_require(prox, "weight", label), "proximity.weight", label, strict=False)
        goal = _require(cfg, "goal", label, (dict,))
        for key in ("weight", "terminal_weight"):
            _positive(_require(goal, key, label), f"goal.{key}", label, strict=False)
        frac = _positive(goal.get("activation_fraction", 0.5),
                         "goal.activation_fraction", label, strict=False)
        if frac > 1:
            _fail(label, "goal.activation_fraction must be in [0, 1]")
        effort = _require(cfg, "control_effort", label, (dict,))
        weights = _require(effort, "weights", label, (list,))
        if len(weights) != 2 or any(w <= 0 for w in weights):
            _fail(label, "control_effort.weights must be two positive numbers")
        _positive(_require(cfg, "collision_threshold", label),
                  "collision_threshold", label)
        if "corridor" in cfg:
            corridor = cfg["corridor"]
            if not isinstance(corridor, dict):
                _fail(label, "corridor must be a mapping")
            lo = _require(corridor, "lower", label)
            hi = _require(corridor, "upper", label)
            if not lo < hi:
                _fail(label, f"corridor bounds must satisfy lower < upper, "
                             f"got [{lo}, {hi}]")
            _positive(_require(corridor, "weight", label), "corridor.weight",
                      label, strict=False)
        if "speed_bounds" in cfg:
            speed = cfg["speed_bounds"]
            if not isinstance(speed, dict):
                _fail(label, "speed_bounds must be a mapping")
            if speed.get("lower") is None and speed.get("upper") is None:
                _fail(label, "speed_bounds needs a lower or an upper bound")
            _positive(_require(speed, "weight", label), "speed_bounds.weight",
                      label, strict=False)
        for p, player in enumerate(players):
            if not isinstance(player, dict):
                _fail(label, f"players[{p}] must be a mapping")
            start = _require(player, "start", label, (list,))
            if len(start) != 4:
                _fail(label, f"players[{p}].start must be (p_x, p_y, theta, v)")
            pgoal = _require(player, "goal", label, (list,))
            if len(pgoal) != 2:
                _fail(label, f"players[{p}].goal must be (x, y)")
    else:
        dyn = _require(cfg, "dynamics", label, (dict,))
        A = np.asarray(_require(dyn, "A", label, (list,)), dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            _fail(label, f"dynamics.A must be square, got shape {A.shape}")
        Bs = _require(dyn, "B", label, (list,))
        if len(Bs) != len(players):
            _fail(label, f"dynamics.B lists {len(Bs)} input matrices for "
                         f"{len(players)} players")
        x0 = _require(cfg, "initial_state", label, (list,))
        if len(x0) != A.shape[0]:
            _fail(label, f"initial_state has dimension {len(x0)}, expected {A.shape[0]}")
        for p, player in enumerate(players):
            if not isinstance(player, dict):
                _fail(label, f"players[{p}] must be a mapping")
            for key in ("state_weight", "target", "control_weight", "terminal_weight"):
                value = _require(player, key, label, (list,))
                expect = A.shape[0] if key != "control_weight" else None
                if expect is not None and len(value) != expect:
                    _fail(label, f"players[{p}].{key} has length {len(value)}, "
                                 f"expected {expect}")

    _positive(cfg.get("initial_jitter", 0.0), "initial_jitter", label, strict=False)
    if "solver" in cfg and not isinstance(cfg["solver"], dict):
        _fail(label, "solver must be a mapping")
    if not isinstance(name, str) or not name:
        _fail(label, "name must be a non-empty string")
    return cfg


def load_scenario_config(source) -> dict:
    """Read and validate a scenario config from a name or a YAML file path."""
    source = str(source)
    if source in BUILTIN_SCENARIOS:
        text = (resources.files("ilqnash") / "configs" / f"{source}.yaml").read_text()
        label = f"builtin scenario '{source}'"
    else:
        path = Path(source)
        if not path.exists():
            raise ScenarioConfigError(
                f"unknown scenario '{source}': not a built-in "
                f"{list(BUILTIN_SCENARIOS)} and no such config file"
            )
        text = path.read_text()
        label = str(path)
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioConfigError(f"{label}: invalid YAML ({exc})") from None
    return validate_scenario_config(cfg, label)


def _solver_config(cfg: dict, mode=None) -> SolverConfig:
    solver = dict(cfg.get("solver", {}))
    if mode is not None:
        solver["mode"] = mode
    known = {
        "max_iterations": int,
        "convergence_tolerance": float,
        "initial_step_scale": float,
        "step_backtrack_factor": float,
        "min_step_scale": float,
        "cost_increase_slack": float,
        "mode": str,
    }
    kwargs = {}
    for key, value in solver.items():
        if key not in known:
            raise ScenarioConfigError(f"unknown solver option '{key}'")
        kwargs[key] = known[key](value)
    return SolverConfig(**kwargs)


def build_scenario(cfg: dict, horizon=None, dt=None, mode=None) -> ScenarioDefinition:
    """Construct the game of a validated config, with optional overrides."""
    cfg = dict(cfg)
    if horizon is not None:
        cfg["horizon"] = int(horizon)
    if dt is not None:
        cfg["dt"] = float(dt)
    validate_scenario_config(cfg, f"scenario '{cfg.get('name', '?')}'")
    if cfg["kind"] == "unicycle":
        return _build_unicycle(cfg, mode)
    return _build_lq(cfg, mode)


def _build_unicycle(cfg, mode) -> ScenarioDefinition:
    players = cfg["players"]
    N = len(players)
    horizon, dt = cfg["horizon"], float(cfg["dt"])
    dynamics = ProductSystem([UnicycleModel() for _ in range(N)])
    slices = dynamics.partition.slices
    pos = [dynamics.position_indices(i) for i in range(N)]

    prox = cfg["proximity"]
    goal_cfg = cfg["goal"]
    t_activate = float(goal_cfg.get("activation_fraction", 0.5)) * horizon * dt
    effort_W = np.diag(cfg["control_effort"]["weights"])
    corridor = cfg.get("corridor")
    speed = cfg.get("speed_bounds")

    goals = [np.asarray(p["goal"], dtype=float) for p in players]
    costs = []
    for i in range(N):
        stage = [GoalCost(pos[i], goals[i], goal_cfg["weight"], t_activate)]
        for j in range(N):
            if j != i:
                stage.append(ProximityCost(pos[i], pos[j], prox["radius"], prox["weight"]))
        if corridor:
            stage.append(SoftBoundCost(pos[i][1], corridor["lower"],
                                       corridor["upper"], corridor["weight"],
                                       name="corridor_wall"))
        if speed:
            stage.append(SoftBoundCost(pos[i][0] + 3, speed.get("lower"),
                                       speed.get("upper"), speed["weight"],
                                       name="speed_bounds"))
        stage.append(ControlEffortCost(i, effort_W, slices[i]))
        terminal = [GoalCost(pos[i], goals[i], goal_cfg["terminal_weight"])]
        costs.append(CompositeCost(i, stage, terminal,
                                   dynamics.state_dim, dynamics.control_dims))

    problem = GameProblem(dynamics, costs, horizon, dt)
    x0 = np.concatenate([np.asarray(p["start"], dtype=float) for p in players])
    threshold = float(cfg["collision_threshold"])

    definition = ScenarioDefinition(
        name=cfg["name"],
        problem=problem,
        initial_state=x0,
        solver=_solver_config(cfg, mode),
        config=cfg,
        collision_threshold=threshold,
        goals=[g.tolist() for g in goals],
        corridor=(float(corridor["lower"]), float(corridor["upper"])) if corridor else None,
        position_indices=pos,
        goal_tolerance=float(goal_cfg["tolerance"]) if "tolerance" in goal_cfg else None,
        jitter=float(cfg.get("initial_jitter", 0.0)),
        jitter_indices=[k for idx in pos for k in idx],
    )
    starts = x0.reshape(N, 4)[:, :2]
    for a in range(N):
        for b in range(a + 1, N):
            if float(np.hypot(*(starts[a] - starts[b]))) <= threshold:
                raise ScenarioConfigError(
                    f"scenario '{cfg['name']}': players {a + 1} and {b + 1} start "
                    f"within the collision threshold {threshold}"
                )
    return definition


def _build_lq(cfg, mode) -> ScenarioDefinition:
    dyn = cfg["dynamics"]
    A = np.asarray(dyn["A"], dtype=float)
    Bs = [np.asarray(B, dtype=float) for B in dyn["B"]]
    dynamics = LinearSystemModel(A, Bs)
    n = dynamics.state_dim

    costs = []
    for i, player in enumerate(cfg["players"]):
        target = np.asarray(player["target"], dtype=float)
        stage = [
            QuadraticStateCost(np.diag(player["state_weight"]), target),
            ControlEffortCost(i, np.diag(player["control_weight"]),
                              dynamics.partition.slices[i]),
        ]
        terminal = [QuadraticStateCost(np.diag(player["terminal_weight"]), target)]
        costs.append(CompositeCost(i, stage, terminal, n, dynamics.control_dims))

    problem = GameProblem(dynamics, costs, cfg["horizon"], float(cfg["dt"]))
    return ScenarioDefinition(
        name=cfg["name"],
        problem=problem,
        initial_state=np.asarray(cfg["initial_state"], dtype=float),
        solver=_solver_config(cfg, mode),
        config=cfg,
        jitter=float(cfg.get("initial_jitter", 0.0)),
        jitter_indices=[0],
    )


def load_scenario(source, horizon=None, dt=None, mode=None) -> ScenarioDefinition:
    """One-call convenience: read, validate, and build a scenario."""
    return build_scenario(load_scenario_config(source), horizon, dt, mode)


def make_lq_benchmark(horizon=None, dt=None) -> ScenarioDefinition:
    """The minimal 2-player, 2-state LQ benchmark game."""
    return load_scenario("lq2p2d", horizon, dt)


def make_hallway_3p(horizon=None, dt=None) -> ScenarioDefinition:
    """Three unicycles crossing a walled corridor in opposing directions."""
    return load_scenario("hallway3", horizon, dt)


def make_freespace_5p(horizon=None, dt=None) -> ScenarioDefinition:
    """Five unicycles on a circle swapping to antipodal goals."""
    return load_scenario("freespace5", horizon, dt)
