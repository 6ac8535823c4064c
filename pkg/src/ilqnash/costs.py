"""Player cost interface and the built-in cost terms.

A player's objective is a stage cost ``g_i(x, u_1..u_N, t)`` plus a terminal
cost ``g_i^T(x_T)``. The built-in terms cover goal attraction, pairwise
proximity penalties, soft corridor/speed bounds, control effort, and plain
quadratic tracking; each ships with hand-coded gradients and Hessians so the
manual-derivative solver mode needs no numeric differentiation.

All built-in stage terms are nonnegative, continuous, and continuously
differentiable (squared-hinge penalties at activation boundaries). Cross
second derivatives between state and controls are identically zero for every
built-in term.
"""

from __future__ import annotations

import numpy as np

from .errors import CostDerivativeError, GameDefinitionError

# -- primitive formulas ----------------------------------------------------


def proximity_cost(p_own, p_other, radius, weight):
    """Squared-hinge proximity penalty ``w (d_bar - d)^2`` for ``d < d_bar``.

    ``d`` is the planar distance between the two positions. Zero at and
    beyond the avoidance radius; finite (``w d_bar^2``) at coincidence.
    """
    d = float(np.hypot(*(np.asarray(p_own, dtype=float) - np.asarray(p_other, dtype=float))))
    if d >= radius:
        return 0.0
    return weight * (radius - d) ** 2


def goal_cost(p, goal, weight):
    """Quadratic distance-to-goal penalty ``w ||p - goal||^2``."""
    e = np.asarray(p, dtype=float) - np.asarray(goal, dtype=float)
    return weight * float(e @ e)


def input_cost(u, W):
    """Control-effort penalty ``0.5 u^T W u``."""
    u = np.asarray(u, dtype=float)
    return 0.5 * float(u @ np.asarray(W, dtype=float) @ u)


def _symmetric_weight(W, name):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[0] != W.shape[1]:
        raise GameDefinitionError(f"{name} weight matrix must be square, got {W.shape}")
    if not np.allclose(W, W.T, atol=1e-12):
        raise GameDefinitionError(f"{name} weight matrix must be symmetric")
    return 0.5 * (W + W.T)


# -- quadratic accumulation ------------------------------------------------


class QuadraticAccumulator:
    """Collects gradient/Hessian contributions of cost terms over a batch.

    Holds the state gradient ``l`` and Hessian ``Q`` for all ``K`` points,
    and lazily creates per-player control blocks ``(r_j, R_j)`` the first
    time a term touches player ``j``'s controls.
    """

    def __init__(self, K, state_dim, control_dims):
        self.l = np.zeros((K, state_dim))
        self.Q = np.zeros((K, state_dim, state_dim))
        self._control_dims = control_dims
        self._K = K
        self.blocks = {}

    def control_block(self, player):
        if player not in self.blocks:
            m = self._control_dims[player]
            self.blocks[player] = (np.zeros((self._K, m)), np.zeros((self._K, m, m)))
        return self.blocks[player]


class CostTerm:
    """One additive piece of a player's cost.

    Subclasses implement :meth:`value_batch` and :meth:`quadraticize_batch`
    over ``K`` operating points; ``us`` is the stacked control matrix and is
    ``None`` when the term is evaluated at the terminal state. ``ts`` is
    ``None`` in the terminal context as well.
    """

    name = "cost_term"

    def value_batch(self, xs, us, ts):
        raise NotImplementedError

    def quadraticize_batch(self, xs, us, ts, acc: QuadraticAccumulator, player):
        """Add this term's gradient/Hessian contributions to ``acc``.

        ``player`` is the 1-based index of the owning player, used only for
        error reporting.
        """
        raise NotImplementedError


class GoalCost(CostTerm):
    """Pulls a player's planar position toward a goal: ``w ||p - goal||^2``.

    Inactive before ``t_activate`` (pass ``None`` to keep it always on, as
    terminal usage does).
    """

    name = "goal"

    def __init__(self, position_indices, goal, weight, t_activate=None):
        self.idx = tuple(int(i) for i in position_indices)
        self.goal = np.asarray(goal, dtype=float)
        if self.goal.shape != (len(self.idx),):
            raise GameDefinitionError(
                f"goal has shape {self.goal.shape}, expected ({len(self.idx)},)"
            )
        if weight < 0:
            raise GameDefinitionError("goal weight must be >= 0")
        self.weight = float(weight)
        self.t_activate = None if t_activate is None else float(t_activate)

    def _active(self, ts, K):
        if self.t_activate is None or ts is None:
            return np.ones(K)
        return (np.asarray(ts) >= self.t_activate - 1e-12).astype(float)

    def value_batch(self, xs, us, ts):
        e = xs[:, self.idx] - self.goal
        return self.weight * self._active(ts, xs.shape[0]) * np.einsum("ki,ki->k", e, e)

    def quadraticize_batch(self, xs, us, ts, acc, player):
        active = self._active(ts, xs.shape[0])
        e = xs[:, self.idx] - self.goal
        coef = 2.0 * self.weight * active
        acc.l[:, self.idx] += coef[:, None] * e
        for i in self.idx:
            acc.Q[:, i, i] += coef


class QuadraticStateCost(CostTerm):
    """Full-state quadratic tracking cost ``0.5 (x - target)^T W (x - target)``."""

    name = "quadratic_state"

    def __init__(self, W, target=None):
        self.W = _symmetric_weight(W, "state")
        n = self.W.shape[0]
        self.target = np.zeros(n) if target is None else np.asarray(target, dtype=float)
        if self.target.shape != (n,):
            raise GameDefinitionError(
                f"target has shape {self.target.shape}, expected ({n},)"
            )

    def value_batch(self, xs, us, ts):
        e = xs - self.target
        return 0.5 * np.einsum("ki,ij,kj->k", e, self.W, e)

    def quadraticize_batch(self, xs, us, ts, acc, player):
        acc.l += (xs - self.target) @ self.W
        acc.Q += self.W


class ProximityCost(CostTerm):
    """Penalizes one ordered player pair closer than the avoidance radius.

    ``w (d_bar - d)^2`` for planar distance ``d < d_bar``, else zero; the
    squared hinge keeps the value continuously differentiable at ``d_bar``.
    The Hessian is indefinite inside the radius and relies on the
    quadraticization's eigenvalue flooring downstream.
    """

    name = "proximity"

    def __init__(self, own_indices, other_indices, radius, weight):
        self.own = tuple(int(i) for i in own_indices)
        self.other = tuple(int(i) for i in other_indices)
        if radius <= 0:
            raise GameDefinitionError("avoidance radius must be > 0")
        if weight < 0:
            raise GameDefinitionError("proximity weight must be >= 0")
        self.radius = float(radius)
        self.weight = float(weight)
        self._rows = np.array(self.own + self.other)

    def _distance(self, xs):
        e = xs[:, self.own] - xs[:, self.other]
        return e, np.hypot(e[:, 0], e[:, 1])

    def value_batch(self, xs, us, ts):
        _, d = self._distance(xs)
        gap = np.maximum(self.radius - d, 0.0)
        return self.weight * gap * gap

    def quadraticize_batch(self, xs, us, ts, acc, player):
        e, d = self._distance(xs)
        active = np.nonzero(d < self.radius)[0]
        if active.size == 0:
            return
        if np.any(d[active] < 1e-12):
            k = int(active[np.argmin(d[active])])
            raise CostDerivativeError(player, None if ts is None else k, self.name)
        da = d[active]
        ua = e[active] / da[:, None]

        # c(d) = w (d_bar - d)^2:  dc/dd = -2w (d_bar - d)
        slope = -2.0 * self.weight * (self.radius - da)
        grad = slope[:, None] * ua
        acc.l[np.ix_(active, self.own)] += grad
        acc.l[np.ix_(active, self.other)] -= grad

        # Hessian wrt own position: a u u^T + b (I - u u^T),
        # a = d2c/dd2 = 2w, b = (dc/dd)/d; other blocks follow by symmetry.
        a = 2.0 * self.weight
        b = slope / da
        H = (a - b)[:, None, None] * (ua[:, :, None] * ua[:, None, :])
        H[:, 0, 0] += b
        H[:, 1, 1] += b
        block = np.empty((active.size, 4, 4))
        block[:, :2, :2] = H
        block[:, :2, 2:] = -H
        block[:, 2:, :2] = -H
        block[:, 2:, 2:] = H
        acc.Q[active[:, None, None], self._rows[None, :, None], self._rows[None, None, :]] += block


class SoftBoundCost(CostTerm):
    """Squared-hinge penalty keeping one state coordinate inside ``[lower, upper]``.

    Used for corridor walls (on a position coordinate) and soft speed
    limits (on a velocity coordinate). Either bound may be ``None``.
    """

    def __init__(self, index, lower, upper, weight, name="soft_bound"):
        if lower is None and upper is None:
            raise GameDefinitionError(f"{name}: at least one bound is required")
        if lower is not None and upper is not None and lower >= upper:
            raise GameDefinitionError(f"{name}: lower bound must be below upper bound")
        if weight < 0:
            raise GameDefinitionError(f"{name} weight must be >= 0")
        self.index = int(index)
        self.lower = None if lower is None else float(lower)
        self.upper = None if upper is None else float(upper)
        self.weight = float(weight)
        self.name = name

    def _violation(self, z):
        v = np.zeros_like(z)
        if self.upper is not None:
            v += np.maximum(z - self.upper, 0.0)
        if self.lower is not None:
            v -= np.maximum(self.lower - z, 0.0)
        return v

    def value_batch(self, xs, us, ts):
        v = self._violation(xs[:, self.index])
        return self.weight * v * v

    def quadraticize_batch(self, xs, us, ts, acc, player):
        v = self._violation(xs[:, self.index])
        acc.l[:, self.index] += 2.0 * self.weight * v
        acc.Q[:, self.index, self.index] += 2.0 * self.weight * (v != 0.0)


class ControlEffortCost(CostTerm):
    """Quadratic effort penalty ``0.5 u_j^T W u_j`` on one player's controls."""

    name = "control_effort"

    def __init__(self, player, W, control_slice):
        self.player = int(player)
        self.W = _symmetric_weight(W, "control")
        self.control_slice = control_slice
        if (control_slice.stop - control_slice.start) != self.W.shape[0]:
            raise GameDefinitionError(
                f"control weight matrix {self.W.shape} does not match control "
                f"block of size {control_slice.stop - control_slice.start}"
            )

    def value_batch(self, xs, us, ts):
        if us is None:
            return np.zeros(xs.shape[0])
        u = us[:, self.control_slice]
        return 0.5 * np.einsum("ki,ij,kj->k", u, self.W, u)

    def quadraticize_batch(self, xs, us, ts, acc, player):
        if us is None:
            return
        r, R = acc.control_block(self.player)
        r += us[:, self.control_slice] @ self.W
        R += self.W


# -- player cost containers -------------------------------------------------


class PlayerCost:
    """Interface one player's objective must satisfy.

    Required: :meth:`stage` and :meth:`terminal`. Optional hooks picked up
    by the derivative providers when present:

    * ``stage_batch(xs, us, ts)`` — vectorized stage values, stacked ``us``;
    * ``stage_quadratic_batch(xs, us, ts)`` — hand-coded second-order data
      ``(l, Q, {player: (r, R)})`` of the *unscaled* stage cost;
    * ``terminal_quadratic(x)`` — hand-coded ``(l, Q)`` of the terminal cost.
    """

    def stage(self, x, us, t) -> float:
        """Stage cost ``g_i(x, u_1..u_N, t)``, per unit time."""
        raise NotImplementedError

    def terminal(self, x) -> float:
        """Terminal cost ``g_i^T(x_T)``."""
        raise NotImplementedError


class CompositeCost(PlayerCost):
    """Sum of built-in cost terms for one player of a product-system game.

    Args:
        player: 0-based index of the owning player.
        stage_terms: terms summed into the stage cost.
        terminal_terms: terms summed into the terminal cost (evaluated on
            the state only).
        state_dim: joint state dimension.
        control_dims: per-player control dimensions (for stacking).
    """

    def __init__(self, player, stage_terms, terminal_terms, state_dim, control_dims):
        self.player = int(player)
        self.stage_terms = list(stage_terms)
        self.terminal_terms = list(terminal_terms)
        self.state_dim = int(state_dim)
        self.control_dims = tuple(int(m) for m in control_dims)
        self._offsets = np.concatenate([[0], np.cumsum(self.control_dims)])

    def _stack(self, us):
        return np.concatenate([np.asarray(u, dtype=float) for u in us])

    def stage(self, x, us, t):
        xs = np.asarray(x, dtype=float)[None, :]
        u = self._stack(us)[None, :]
        ts = np.array([float(t)])
        return float(sum(term.value_batch(xs, u, ts)[0] for term in self.stage_terms))

    def terminal(self, x):
        xs = np.asarray(x, dtype=float)[None, :]
        return float(sum(term.value_batch(xs, None, None)[0] for term in self.terminal_terms))

    def stage_batch(self, xs, us, ts):
        total = np.zeros(xs.shape[0])
        for term in self.stage_terms:
            total += term.value_batch(xs, us, ts)
        return total

    def stage_quadratic_batch(self, xs, us, ts):
        acc = QuadraticAccumulator(xs.shape[0], self.state_dim, self.control_dims)
        for term in self.stage_terms:
            term.quadraticize_batch(xs, us, ts, acc, self.player + 1)
        return acc.l, acc.Q, acc.blocks

    def terminal_quadratic(self, x):
        xs = np.asarray(x, dtype=float)[None, :]
        acc = QuadraticAccumulator(1, self.state_dim, self.control_dims)
        for term in self.terminal_terms:
            term.quadraticize_batch(xs, None, None, acc, self.player + 1)
        return acc.l[0], acc.Q[0]
