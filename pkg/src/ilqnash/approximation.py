"""Per-timestep LQ approximation of a game about an operating point.

Two derivative providers produce the same product: Jacobians ``(A_t, B_{i,t})``
of the *discrete* step map and second-order Taylor data of the dt-scaled
stage costs (state terms ``Q, l``, control terms ``R_ij, r_ij``; cross
state/control second derivatives are dropped). The manual provider consumes
hand-coded Jacobians and cost quadraticizations; the automatic provider
differentiates the very same step map and cost functions numerically with
high-accuracy central differences, so both modes approximate the identical
discrete-time game.

Hessians are regularized by eigenvalue flooring so the downstream dynamic
program is well-posed: state Hessians are shifted to be positive
semidefinite, own-control Hessians to be positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integration
from .errors import CostDerivativeError, GameDefinitionError, NumericalError
from .game import GameProblem, SystemTrajectory, _check_shapes

Q_EIGENVALUE_FLOOR = 0.0
R_EIGENVALUE_FLOOR = 1e-6

_EPS = float(np.finfo(float).eps)
DEFAULT_GRADIENT_STEP = _EPS ** (1.0 / 3.0)   # ~6.1e-6
# Hessians use Richardson-extrapolated central differences (h and h/2,
# truncation O(h^4)), which tolerates a coarser base step than a plain
# stencil; the coarser step keeps the subtractive-cancellation noise of
# second differences below the cross-provider agreement tolerances, while
# the stencil stays narrow enough not to straddle the squared-hinge
# activation boundaries of the built-in costs along solution trajectories.
DEFAULT_HESSIAN_STEP = 6e-4


@dataclass(frozen=True)
class LinearDynamics:
    """Discrete-time linearization at one timestep: ``dx' = A dx + sum_i B_i du_i``."""

    A: np.ndarray
    B: list

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class QuadraticPlayerCost:
    """Quadratic model of one player's cost at one timestep.

    State part ``0.5 dx^T Q dx + l^T dx`` plus, for stage costs, one control
    block ``0.5 du_j^T R[j] du_j + r[j]^T du_j`` per player. ``R[j]``/``r[j]``
    are ``None`` for players whose controls the cost provably does not touch;
    terminal costs carry no control blocks at all.
    """

    Q: np.ndarray
    l: np.ndarray
    R: list | None = None
    r: list | None = None


class LQApproximation:
    """Stagewise LQ model of a game about an operating point.

    Stores the horizon-long sequences as contiguous arrays: ``A`` has shape
    ``(T, n, n)``, ``B[i]`` shape ``(T, n, m_i)``, ``Q``/``l`` shapes
    ``(N, T, n, n)`` / ``(N, T, n)``, and ``R[i][j]`` shape ``(T, m_j, m_j)``
    (``None`` when player ``i``'s cost ignores player ``j``'s controls).
    Terminal data lives in ``Q_terminal``/``l_terminal``.
    """

    def __init__(self, A, B, Q, l, R, r, Q_terminal, l_terminal, control_dims):
        self.A = A
        self.B = B
        self.Q = Q
        self.l = l
        self.R = R
        self.r = r
        self.Q_terminal = Q_terminal
        self.l_terminal = l_terminal
        self.control_dims = tuple(control_dims)

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def state_dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_players(self) -> int:
        return len(self.B)

    def linear_dynamics(self, t) -> LinearDynamics:
        return LinearDynamics(self.A[t], [Bi[t] for Bi in self.B])

    def stage_cost(self, i, t) -> QuadraticPlayerCost:
        R = [None if Rij is None else Rij[t] for Rij in self.R[i]]
        r = [None if rij is None else rij[t] for rij in self.r[i]]
        return QuadraticPlayerCost(self.Q[i, t], self.l[i, t], R, r)

    def terminal_cost(self, i) -> QuadraticPlayerCost:
        return QuadraticPlayerCost(self.Q_terminal[i], self.l_terminal[i])


# -- regularization ----------------------------------------------------------


def floor_spectrum(M, floor):
    """Symmetrize ``M`` and shift it by ``(floor - lambda_min) I`` if needed."""
    M = 0.5 * (M + M.T)
    lam = np.linalg.eigvalsh(M)[0]
    if lam < floor:
        M = M + (floor - lam) * np.eye(M.shape[0])
    return M

def _floor_spectrum_batch(Ms, floor):
    """In-place batched :func:`floor_spectrum` over shape ``(K, d, d)``.

    A Gershgorin bound prefilters matrices that are certainly above the
    floor, so the eigensolver only runs where flooring might apply.
    """
    Ms += np.swapaxes(Ms, -1, -2)
    Ms *= 0.5
    d = Ms.shape[-1]
    diag = np.diagonal(Ms, axis1=-2, axis2=-1)
    radius = np.sum(np.abs(Ms), axis=-1) - np.abs(diag)
    gershgorin = np.min(diag - radius, axis=-1)
    suspect = np.nonzero(gershgorin < floor)[0]
    if suspect.size:
        lam = np.linalg.eigvalsh(Ms[suspect])[:, 0]
        short = np.maximum(floor - lam, 0.0)
        Ms[suspect] += short[:, None, None] * np.eye(d)
    return Ms


# -- derivative providers -----------------------------------------------------


class DerivativeProvider:
    """Policy object that produces raw (unscaled) LQ data at an operating point."""

    mode = "abstract"

    def linearize(self, problem, traj):
        """Jacobians of the discrete step: ``(A (T,n,n), B (T,n,m) stacked)``."""
        raise NotImplementedError

    def quadraticize(self, problem, traj):
        """Raw Taylor data of the per-unit-time stage costs and terminal costs.

        Returns ``(Q (N,T,n,n), l (N,T,n), R, r, QT (N,n,n), lT (N,n))`` with
        ``R[i][j]``/``r[i][j]`` either arrays of shape ``(T, m_j, m_j)`` /
        ``(T, m_j)`` or ``None``.
        """
        raise NotImplementedError


class ManualDifferentiation(DerivativeProvider):
    """Uses hand-coded Jacobians and cost quadraticizations.

    By default these come from the model (``jacobians`` /
    ``jacobians_batch``) and the costs (``stage_quadratic_batch`` /
    ``stage_quadratic`` and ``terminal_quadratic``). Explicit override
    callables may be supplied instead:

    Args:
        dynamics_jacobians: optional ``f(x, us, t) -> (fx, [fu_i])`` with the
            continuous-field Jacobians (the discrete chain rule is applied on
            top, keeping the approximation consistent with the rollout map).
        cost_quadratics: optional list, one entry per player, of
            ``f(x, us, t) -> (l, Q, rs, Rs)`` for the unscaled stage cost
            (``rs``/``Rs`` are per-player lists, ``None`` entries allowed).
    """

    mode = "manual"

    def __init__(self, dynamics_jacobians=None, cost_quadratics=None):
        self.dynamics_jacobians = dynamics_jacobians
        self.cost_quadratics = cost_quadratics

    def linearize(self, problem, traj):
        model = problem.dynamics
        xs, us, ts = traj.states[:-1], traj.controls, problem.stage_times()
        if self.dynamics_jacobians is None:
            return integration.step_jacobians_batch(
                model, xs, us, ts, problem.dt, problem.integrator
            )
        jac = _validated_jacobian_wrapper(self.dynamics_jacobians, model)
        shim = _JacobianShim(model, jac)
        return integration.step_jacobians_batch(
            shim, xs, us, ts, problem.dt, problem.integrator
        )

    def quadraticize(self, problem, traj):
        n, T, N = problem.state_dim, problem.horizon, problem.num_players
        mdims = problem.control_dims
        xs, us, ts = traj.states[:-1], traj.controls, problem.stage_times()
        split = problem.partition.split

        Q = np.zeros((N, T, n, n))
        l = np.zeros((N, T, n))
        R = [[None] * N for _ in range(N)]
        r = [[None] * N for _ in range(N)]
        QT = np.zeros((N, n, n))
        lT = np.zeros((N, n))

        for i, cost in enumerate(problem.costs):
            override = None if self.cost_quadratics is None else self.cost_quadratics[i]
            if override is not None:
                for t in range(T):
                    lt, Qt, rs, Rs = override(xs[t], split(us[t]), ts[t])
                    _check_quadratic_dims(lt, Qt, rs, Rs, n, mdims, i)
                    l[i, t] = lt
                    Q[i, t] = Qt
                    _scatter_blocks(R, r, i, t, T, mdims, rs, Rs)
            elif hasattr(cost, "stage_quadratic_batch"):
                l[i], Q[i], blocks = cost.stage_quadratic_batch(xs, us, ts)
                for j, (rj, Rj) in blocks.items():
                    r[i][j] = rj
                    R[i][j] = Rj
            elif hasattr(cost, "stage_quadratic"):
                for t in range(T):
                    lt, Qt, rs, Rs = cost.stage_quadratic(xs[t], split(us[t]), ts[t])
                    _check_quadratic_dims(lt, Qt, rs, Rs, n, mdims, i)
                    l[i, t] = lt
                    Q[i, t] = Qt
                    _scatter_blocks(R, r, i, t, T, mdims, rs, Rs)
            else:
                raise GameDefinitionError(
                    f"cost of player {i + 1} provides no hand-coded derivatives "
                    "(stage_quadratic_batch or stage_quadratic); use the "
                    "automatic derivative mode instead"
                )

            if not hasattr(cost, "terminal_quadratic"):
                raise GameDefinitionError(
                    f"cost of player {i + 1} provides no terminal_quadratic; "
                    "use the automatic derivative mode instead"
                )
            lt, Qt = cost.terminal_quadratic(traj.states[-1])
            lT[i] = lt
            QT[i] = Qt
        return Q, l, R, r, QT, lT


class AutomaticDifferentiation(DerivativeProvider):
    """Numeric differentiation of the discrete step map and cost functions.

    High-accuracy central finite differences with absolute perturbation
    steps (tuned for states and controls of order one; adjust for very
    differently scaled problems). Second derivatives are Richardson
    extrapolated over steps ``h`` and ``h/2``, giving fourth-order
    truncation while the coarse step suppresses cancellation noise.

    Args:
        gradient_step: perturbation for first derivatives (default
            ``eps**(1/3) ~ 6e-6``).
        hessian_step: coarse perturbation for stage-cost second derivatives
            (default 6e-4).
        terminal_hessian_step: coarse perturbation for the terminal-cost
            Hessian. Terminal costs carry no timestep scaling and commonly
            the largest magnitudes, so they get a wider stencil (default
            ``20 * hessian_step``).

    Only function evaluations are required of the model and costs, so this
    mode works for any user-supplied game. It differentiates through the
    same integrator the rollout uses.
    """

    mode = "automatic"

    def __init__(self, gradient_step=DEFAULT_GRADIENT_STEP,
                 hessian_step=DEFAULT_HESSIAN_STEP,
                 terminal_hessian_step=None):
        if gradient_step <= 0 or hessian_step <= 0:
            raise GameDefinitionError("perturbation steps must be positive")
        self.gradient_step = float(gradient_step)
        self.hessian_step = float(hessian_step)
        self.terminal_hessian_step = float(
            20 * hessian_step if terminal_hessian_step is None
            else terminal_hessian_step
        )
        if self.terminal_hessian_step <= 0:
            raise GameDefinitionError("perturbation steps must be positive")

    def linearize(self, problem, traj):
        model, dt, method = problem.dynamics, problem.dt, problem.integrator
        xs, us, ts = traj.states[:-1], traj.controls, problem.stage_times()
        T, n = xs.shape
        m = problem.control_dim
        h = self.gradient_step

        def step(x_pts, u_pts):
            return integration.step_batch(model, x_pts, u_pts, ts, dt, method)

        A = np.empty((T, n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            A[:, :, j] = (step(xs + e, us) - step(xs - e, us)) / (2 * h)
        B = np.empty((T, n, m))
        for j in range(m):
            e = np.zeros(m)
            e[j] = h
            B[:, :, j] = (step(xs, us + e) - step(xs, us - e)) / (2 * h)
        return A, B

    def quadraticize(self, problem, traj):
        n, T, N = problem.state_dim, problem.horizon, problem.num_players
        mdims = problem.control_dims
        offsets = problem.partition.offsets
        xs, us, ts = traj.states[:-1], traj.controls, problem.stage_times()

        Q = np.empty((N, T, n, n))
        l = np.empty((N, T, n))
        R = [[None] * N for _ in range(N)]
        r = [[None] * N for _ in range(N)]
        QT = np.empty((N, n, n))
        lT = np.empty((N, n))

        for i, cost in enumerate(problem.costs):
            f_x = _stage_evaluator(cost, problem, us, ts, wrt="x")
            f_u = _stage_evaluator(cost, problem, xs, ts, wrt="u")
            l[i] = _fd_gradient(f_x, xs, self.gradient_step)
            Q[i] = _fd_hessian_richardson(f_x, xs, self.hessian_step)
            for j in range(N):
                sl = slice(offsets[j], offsets[j] + mdims[j])
                g = _fd_gradient(f_u, us, self.gradient_step, coords=sl)
                H = _fd_hessian_richardson(f_u, us, self.hessian_step, coords=sl)
                r[i][j] = g
                R[i][j] = H

            def f_T(x_pts):
                return np.array([cost.terminal(x) for x in x_pts])

            xT = traj.states[-1][None, :]
            lT[i] = _fd_gradient(f_T, xT, self.gradient_step)[0]
            QT[i] = _fd_hessian_richardson(f_T, xT, self.terminal_hessian_step)[0]
        return Q, l, R, r, QT, lT


def provider_from_mode(mode) -> DerivativeProvider:
    """Build a provider from a mode name (``manual``/``md`` or ``automatic``/``ad``)."""
    if isinstance(mode, DerivativeProvider):
        return mode
    key = str(mode).lower()
    if key in ("manual", "md"):
        return ManualDifferentiation()
    if key in ("automatic", "ad", "auto"):
        return AutomaticDifferentiation()
    raise GameDefinitionError(
        f"unknown derivative mode '{mode}', expected 'manual'/'md' or 'automatic'/'ad'"
    )


# -- public operations --------------------------------------------------------


def lq_approximate(problem: GameProblem, traj: SystemTrajectory,
                   provider: DerivativeProvider | str = "manual") -> LQApproximation:
    """LQ model of the game about ``traj``: linearized step + quadraticized costs.

    Stage cost data is scaled by ``dt`` (matching
    :func:`~ilqnash.game.trajectory_cost`), symmetrized, and floored: state
    Hessians to PSD, own-control Hessians to eigenvalues ``>= 1e-6``.
    """
    _check_shapes(problem, traj)
    provider = provider_from_mode(provider)

    A, B_stacked = provider.linearize(problem, traj)
    # A finite-sum test is one cheap pass; non-finite entries poison the sum.
    if not (np.isfinite(A.sum()) and np.isfinite(B_stacked.sum())):
        bad_t = int(np.nonzero(
            ~np.all(np.isfinite(A.reshape(A.shape[0], -1)), axis=1)
            | ~np.all(np.isfinite(B_stacked.reshape(B_stacked.shape[0], -1)), axis=1)
        )[0][0])
        raise NumericalError(f"non-finite dynamics Jacobian at timestep {bad_t}")
    B = [np.ascontiguousarray(B_stacked[:, :, s]) for s in problem.partition.slices]

    Q, l, R, r, QT, lT = provider.quadraticize(problem, traj)
    dt = problem.dt
    Q *= dt
    l *= dt
    N = problem.num_players
    for i in range(N):
        _check_finite_cost(Q[i], l[i], i, kind="stage")
        _check_finite_cost(QT[i], lT[i], i, kind="terminal")
        _floor_spectrum_batch(Q[i], Q_EIGENVALUE_FLOOR)
        QT[i] = floor_spectrum(QT[i], Q_EIGENVALUE_FLOOR)
        for j in range(N):
            if R[i][j] is not None:
                R[i][j] = R[i][j] * dt
                r[i][j] = r[i][j] * dt
                _check_finite_cost(R[i][j], r[i][j], i, kind="stage")
        # The own-control Hessian must exist and be positive definite for
        # the dynamic program even if the cost ignores the player's controls.
        mi = problem.control_dims[i]
        if R[i][i] is None:
            R[i][i] = np.zeros((problem.horizon, mi, mi))
            r[i][i] = np.zeros((problem.horizon, mi))
        _floor_spectrum_batch(R[i][i], R_EIGENVALUE_FLOOR)
        for j in range(N):
            if j != i and R[i][j] is not None:
                Rij = R[i][j]
                Rij += np.swapaxes(Rij, -1, -2)
                Rij *= 0.5

    return LQApproximation(A, B, Q, l, R, r, QT, lT, problem.control_dims)


def linearize_dynamics(problem, traj, provider="manual"):
    """Per-timestep :class:`LinearDynamics` of the discrete step about ``traj``."""
    approx = lq_approximate(problem, traj, provider)
    return [approx.linear_dynamics(t) for t in range(approx.horizon)]


def quadraticize_costs(problem, traj, provider="manual"):
    """Per-timestep quadratic cost models about ``traj``.

    Returns ``(stage, terminal)``: ``stage[t][i]`` and ``terminal[i]`` are
    :class:`QuadraticPlayerCost` instances (dt-scaled, regularized).
    """
    approx = lq_approximate(problem, traj, provider)
    stage = [
        [approx.stage_cost(i, t) for i in range(approx.num_players)]
        for t in range(approx.horizon)
    ]
    terminal = [approx.terminal_cost(i) for i in range(approx.num_players)]
    return stage, terminal


# -- helpers ------------------------------------------------------------------


class _JacobianShim:
    """Presents override continuous Jacobians with the model's batch interface."""

    def __init__(self, model, jac):
        self._model = model
        self._jac = jac
        self.vector_field_batch = model.vector_field_batch
        self.control_dim = model.control_dim

    def jacobians_batch(self, xs, us, ts):
        K, n = xs.shape
        fx = np.empty((K, n, n))
        fu = np.empty((K, n, self._model.control_dim))
        split = self._model.partition.split
        for k in range(K):
            jx, jus = self._jac(xs[k], split(us[k]), ts[k])
            fx[k] = jx
            fu[k] = np.concatenate([np.asarray(j, dtype=float) for j in jus], axis=1)
        return fx, fu


def _validated_jacobian_wrapper(jac, model):
    n, mdims = model.state_dim, model.control_dims

    def wrapped(x, us, t):
        fx, fus = jac(x, us, t)
        fx = np.asarray(fx, dtype=float)
        if fx.shape != (n, n):
            raise GameDefinitionError(
                f"manual state Jacobian has shape {fx.shape}, expected {(n, n)}"
            )
        if len(fus) != len(mdims):
            raise GameDefinitionError(
                f"manual Jacobians cover {len(fus)} players, expected {len(mdims)}"
            )
        out = []
        for i, (fu, m) in enumerate(zip(fus, mdims)):
            fu = np.asarray(fu, dtype=float)
            if fu.shape != (n, m):
                raise GameDefinitionError(
                    f"manual control Jacobian of player {i + 1} has shape "
                    f"{fu.shape}, expected {(n, m)}"
                )
            out.append(fu)
        return fx, out

    return wrapped


def _check_quadratic_dims(l, Q, rs, Rs, n, mdims, i):
    l = np.asarray(l)
    Q = np.asarray(Q)
    if l.shape != (n,) or Q.shape != (n, n):
        raise GameDefinitionError(
            f"manual cost quadratic of player {i + 1} has shapes l{l.shape}, "
            f"Q{Q.shape}, expected ({n},), ({n}, {n})"
        )
    for j, m in enumerate(mdims):
        rj = None if rs is None else rs[j]
        Rj = None if Rs is None else Rs[j]
        if (rj is None) != (Rj is None):
            raise GameDefinitionError(
                f"manual cost quadratic of player {i + 1} must supply r and R "
                f"together for player {j + 1}"
            )
        if Rj is not None and (np.shape(rj) != (m,) or np.shape(Rj) != (m, m)):
            raise GameDefinitionError(
                f"manual control quadratic of player {i + 1} wrt player {j + 1} "
                f"has shapes {np.shape(rj)}, {np.shape(Rj)}, expected ({m},), ({m}, {m})"
            )


def _scatter_blocks(R, r, i, t, T, mdims, rs, Rs):
    if Rs is None:
        return
    for j, m in enumerate(mdims):
        if Rs[j] is None:
            continue
        if R[i][j] is None:
            R[i][j] = np.zeros((T, m, m))
            r[i][j] = np.zeros((T, m))
        R[i][j][t] = Rs[j]
        r[i][j][t] = rs[j]


def _check_finite_cost(H, g, i, kind):
    if np.isfinite(H.sum()) and np.isfinite(g.sum()):
        return
    if H.ndim == 3:
        bad = ~(np.all(np.isfinite(H.reshape(H.shape[0], -1)), axis=1)
                & np.all(np.isfinite(g), axis=1))
        step = int(np.nonzero(bad)[0][0])
    else:
        step = None
    raise CostDerivativeError(i + 1, step, f"{kind}_cost")


def _stage_evaluator(cost, problem, fixed, ts, wrt):
    """Batched stage-cost evaluator as a function of states or stacked controls."""
    split = problem.partition.split

    if hasattr(cost, "stage_batch"):
        if wrt == "x":
            return lambda x_pts: cost.stage_batch(x_pts, fixed, ts)
        return lambda u_pts: cost.stage_batch(fixed, u_pts, ts)

    def loop(xs, us):
        return np.array(
            [cost.stage(xs[t], split(us[t]), ts[t]) for t in range(len(ts))]
        )

    if wrt == "x":
        return lambda x_pts: loop(x_pts, fixed)
    return lambda u_pts: loop(fixed, u_pts)


def _fd_gradient(f, z, h, coords=None):
    """Central-difference gradient of a batched scalar function.

    ``z`` has shape ``(K, d)``; returns ``(K, |coords|)`` (all coordinates
    when ``coords`` is None).
    """
    d = z.shape[1]
    idx = range(d) if coords is None else range(d)[coords]
    out = np.empty((z.shape[0], len(idx)))
    for c, j in enumerate(idx):
        e = np.zeros(d)
        e[j] = h
        out[:, c] = (f(z + e) - f(z - e)) / (2 * h)
    return out


def _fd_hessian_richardson(f, z, h, coords=None):
    """Richardson-extrapolated central-difference Hessian block.

    Combines the stencils at ``h`` and ``h/2`` as ``(4 H_{h/2} - H_h) / 3``,
    cancelling the leading O(h^2) truncation term.
    """
    coarse = _fd_hessian(f, z, h, coords)
    fine = _fd_hessian(f, z, h / 2, coords)
    return (4.0 * fine - coarse) / 3.0


def _fd_hessian(f, z, h, coords=None):
    """Central-difference Hessian block of a batched scalar function."""
    d = z.shape[1]
    idx = list(range(d) if coords is None else range(d)[coords])
    b = len(idx)
    K = z.shape[0]
    out = np.empty((K, b, b))
    center = f(z)
    for a, j in enumerate(idx):
        ej = np.zeros(d)
        ej[j] = h
        out[:, a, a] = (f(z + ej) - 2 * center + f(z - ej)) / (h * h)
        for c in range(a + 1, b):
            ek = np.zeros(d)
            ek[idx[c]] = h
            mixed = (f(z + ej + ek) - f(z + ej - ek) - f(z - ej + ek) + f(z - ej - ek)) \
                / (4 * h * h)
            out[:, a, c] = mixed
            out[:, c, a] = mixed
    return out
