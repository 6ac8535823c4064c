"""Trajectory documents: a self-contained, serializable solve record.

The on-disk format is JSON (schema ``ilqnash.trajectory/1``): solve
metadata, the full state/control arrays, per-player costs, and optional
scenario display info (goals, corridor, position indices). Floats are
written with shortest round-trip representation, so write-then-read
reproduces every array bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DocumentFormatError

SCHEMA_VERSION = "ilqnash.trajectory/1"

PLOT_DATA_HEADER = ("kind", "player", "step", "time", "x", "y", "heading", "speed")


@dataclass
class TrajectoryDocument:
    """Solve output plus the metadata needed to interpret it standalone."""

    scenario: str
    num_players: int
    state_dim: int
    control_dims: list
    horizon: int
    dt: float
    solver_mode: str
    converged: bool
    iterations: int
    states: np.ndarray
    controls: np.ndarray
    player_costs: np.ndarray
    scenario_info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        self.player_costs = np.asarray(self.player_costs, dtype=float)
        self.control_dims = [int(m) for m in self.control_dims]
        T, n = self.horizon, self.state_dim
        if self.states.shape != (T + 1, n):
            raise DocumentFormatError(
                f"states have shape {self.states.shape}, metadata implies {(T + 1, n)}"
            )
        if self.controls.shape != (T, sum(self.control_dims)):
            raise DocumentFormatError(
                f"controls have shape {self.controls.shape}, metadata implies "
                f"{(T, sum(self.control_dims))}"
            )
        if len(self.control_dims) != self.num_players:
            raise DocumentFormatError(
                f"{len(self.control_dims)} control dimensions for "
                f"{self.num_players} players"
            )
        if self.player_costs.shape != (self.num_players,):
            raise DocumentFormatError(
                f"player costs have shape {self.player_costs.shape}, expected "
                f"({self.num_players},)"
            )


def document_from_result(scenario, result, mode) -> TrajectoryDocument:
    """Package a :class:`~ilqnash.solver.SolveResult` of a scenario solve."""
    problem = scenario.problem
    info = {}
    if scenario.position_indices:
        info["position_indices"] = [list(idx) for idx in scenario.position_indices]
        info["heading_indices"] = [idx[0] + 2 for idx in scenario.position_indices]
        info["speed_indices"] = [idx[0] + 3 for idx in scenario.position_indices]
    if scenario.goals:
        info["goals"] = [list(g) for g in scenario.goals]
    if scenario.corridor:
        info["corridor"] = list(scenario.corridor)
    if scenario.collision_threshold is not None:
        info["collision_threshold"] = scenario.collision_threshold
    return TrajectoryDocument(
        scenario=scenario.name,
        num_players=problem.num_players,
        state_dim=problem.state_dim,
        control_dims=list(problem.control_dims),
        horizon=problem.horizon,
        dt=problem.dt,
        solver_mode=mode,
        converged=result.converged,
        iterations=result.iterations,
        states=result.trajectory.states,
        controls=result.trajectory.controls,
        player_costs=result.player_costs,
        scenario_info=info,
    )


def write_document(doc: TrajectoryDocument, path):
    payload = {
        "schema": SCHEMA_VERSION,
        "scenario": doc.scenario,
        "players": doc.num_players,
        "state_dim": doc.state_dim,
        "control_dims": doc.control_dims,
        "horizon": doc.horizon,
        "dt": doc.dt,
        "solver_mode": doc.solver_mode,
        "converged": doc.converged,
        "iterations": doc.iterations,
        "player_costs": doc.player_costs.tolist(),
        "states": doc.states.tolist(),
        "controls": doc.controls.tolist(),
        "scenario_info": doc.scenario_info or None,
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def read_document(path) -> TrajectoryDocument:
    path = Path(path)
    if not path.exists():
        raise DocumentFormatError(f"no such trajectory document: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DocumentFormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise DocumentFormatError(f"{path}: top level must be an object")
    if payload.get("schema") != SCHEMA_VERSION:
        raise DocumentFormatError(
            f"{path}: schema '{payload.get('schema')}' is not '{SCHEMA_VERSION}'"
        )
    required = ("scenario", "players", "state_dim", "control_dims", "horizon",
                "dt", "solver_mode", "converged", "iterations", "player_costs",
                "states", "controls")
    missing = [key for key in required if key not in payload]
    if missing:
        raise DocumentFormatError(f"{path}: missing keys {missing}")
    try:
        return TrajectoryDocument(
            scenario=payload["scenario"],
            num_players=int(payload["players"]),
            state_dim=int(payload["state_dim"]),
            control_dims=payload["control_dims"],
            horizon=int(payload["horizon"]),
            dt=float(payload["dt"]),
            solver_mode=payload["solver_mode"],
            converged=bool(payload["converged"]),
            iterations=int(payload["iterations"]),
            states=payload["states"],
            controls=payload["controls"],
            player_costs=payload["player_costs"],
            scenario_info=payload.get("scenario_info") or {},
        )
    except (TypeError, ValueError) as exc:
        raise DocumentFormatError(f"{path}: {exc}") from None


# -- plot-ready emission -----------------------------------------------------


def _fmt(value) -> str:
    return repr(float(value))


def plot_data_rows(doc: TrajectoryDocument):
    """Long-form rows (kind, player, step, time, x, y, heading, speed).

    Row kinds: ``state`` (one per player per timestep), ``goal`` (one per
    player with a goal), and ``corridor`` (one per wall). Positions are
    copied verbatim from the document's state columns.
    """
    info = doc.scenario_info
    pos = info.get("position_indices")
    if not pos:
        raise DocumentFormatError(
            f"document of scenario '{doc.scenario}' carries no planar player "
            "positions; nothing to plot"
        )
    heading = info.get("heading_indices", [None] * doc.num_players)
    speed = info.get("speed_indices", [None] * doc.num_players)
    rows = []
    for p in range(doc.num_players):
        ix, iy = pos[p]
        for k in range(doc.horizon + 1):
            x = doc.states[k]
            rows.append((
                "state", str(p + 1), str(k), _fmt(k * doc.dt),
                _fmt(x[ix]), _fmt(x[iy]),
                _fmt(x[heading[p]]) if heading[p] is not None else "",
                _fmt(x[speed[p]]) if speed[p] is not None else "",
            ))
    for p, goal in enumerate(info.get("goals") or []):
        rows.append(("goal", str(p + 1), "", "", _fmt(goal[0]), _fmt(goal[1]), "", ""))
    corridor = info.get("corridor")
    if corridor:
        rows.append(("corridor", "", "", "", "", _fmt(corridor[0]), "", ""))
        rows.append(("corridor", "", "", "", "", _fmt(corridor[1]), "", ""))
    return rows


def write_plot_data(doc: TrajectoryDocument, path):
    lines = [",".join(PLOT_DATA_HEADER)]
    lines += [",".join(row) for row in plot_data_rows(doc)]
    Path(path).write_text("\n".join(lines) + "\n")


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
               "#8c564b", "#17becf", "#e377c2")


def write_svg(doc: TrajectoryDocument, path, size=640):
    """Minimal standalone SVG of the planar paths, goals, and corridor."""
    info = doc.scenario_info
    pos = info.get("position_indices")
    if not pos:
        raise DocumentFormatError(
            f"document of scenario '{doc.scenario}' carries no planar player "
            "positions; nothing to plot"
        )
    traces = [doc.states[:, list(idx)] for idx in pos]
    all_xy = np.concatenate(traces + [np.asarray(info.get("goals") or np.zeros((0, 2)))])
    lo = all_xy.min(axis=0) - 0.5
    hi = all_xy.max(axis=0) + 0.5
    span = np.maximum(hi - lo, 1e-6)
    scale = (size - 20) / float(np.max(span))

    def to_px(p):
        return (10 + (p[0] - lo[0]) * scale, size - 10 - (p[1] - lo[1]) * scale)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    corridor = info.get("corridor")
    if corridor:
        for y in corridor:
            (x1, y1), (x2, _) = to_px((lo[0], y)), to_px((hi[0], y))
            parts.append(
                f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y1:.1f}" '
                'stroke="#444" stroke-width="2" stroke-dasharray="6 4"/>'
            )
    for p, trace in enumerate(traces):
        color = _SVG_COLORS[p % len(_SVG_COLORS)]
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in map(to_px, trace))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        sx, sy = to_px(trace[0])
        parts.append(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="4" fill="{color}"/>')
    for p, goal in enumerate(info.get("goals") or []):
        color = _SVG_COLORS[p % len(_SVG_COLORS)]
        gx, gy = to_px(goal)
        parts.append(
            f'<circle cx="{gx:.2f}" cy="{gy:.2f}" r="6" fill="none" '
            f'stroke="{color}" stroke-width="2"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
