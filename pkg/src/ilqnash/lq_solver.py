"""Feedback-Nash solver for finite-horizon, time-varying LQ games.

Backward dynamic programming over the stagewise LQ data. With per-player
cost-to-go models ``V_i(dx) = 0.5 dx^T Z_i dx + zeta_i^T dx`` initialized
from the terminal quadratics, each stage solves the coupled first-order
conditions of all players simultaneously: one dense factorization of the
stacked control system

    S [P_1; ...; P_N] = [B_1^T Z_1 A; ...; B_N^T Z_N A]
    S [a_1; ...; a_N] = [B_1^T zeta_1 + r_11; ...; B_N^T zeta_N + r_NN]

where block ``(i, j)`` of ``S`` is ``R_ii [i = j] + B_i^T Z_i B_j``, followed
by the cost-to-go updates through the closed loop
``F = A - sum_j B_j P_j``, ``beta = -sum_j B_j a_j``:

    Z_i <- Q_i + sum_j P_j^T R_ij P_j + F^T Z_i F
    zeta_i <- l_i + sum_j P_j^T (R_ij a_j - r_ij) + F^T (zeta_i + Z_i beta)

The resulting strategies are affine in the state deviation and satisfy the
Nash property stage by stage: :func:`best_response` recovers exactly the
strategy of any single player when all others are held fixed at theirs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .approximation import LQApproximation
from .errors import GameDefinitionError, SingularStageError
from .strategies import AffineStrategy


@dataclass
class ValueFunctionQuadratic:
    """Cost-to-go model of one player along the horizon (exposed for testing).

    ``Z`` has shape ``(T + 1, n, n)`` and ``zeta`` shape ``(T + 1, n)``;
    index ``t`` models the cost-to-go from timestep ``t`` on.
    """

    Z: np.ndarray
    zeta: np.ndarray


def solve_lq_game(approx: LQApproximation, return_value_functions: bool = False):
    """Solve the LQ game for feedback-Nash affine strategies of all players.

    Args:
        approx: stagewise LQ data satisfying the definiteness invariants.
        return_value_functions: also return the per-player
            :class:`ValueFunctionQuadratic` sequences.

    Returns:
        List of per-player :class:`~ilqnash.strategies.AffineStrategy`
        (and the value functions when requested).

    Raises:
        SingularStageError: the stacked control system of some stage could
            not be factorized; the caller may regularize and retry.
    """
    T, n, N = approx.horizon, approx.state_dim, approx.num_players
    mdims = approx.control_dims
    m = sum(mdims)
    offs = np.concatenate([[0], np.cumsum(mdims)]).astype(np.int64)
    blocks = [slice(int(offs[i]), int(offs[i + 1])) for i in range(N)]
    B_all = np.ascontiguousarray(np.concatenate(approx.B, axis=2))  # (T, n, m)

    # Stack each player's per-opponent control costs block-diagonally over
    # the full control axis; the per-player sums of the recursion then
    # collapse into single stacked products (see _kernels.backward_pass).
    R_full = np.zeros((N, T, m, m))
    r_full = np.zeros((N, T, m))
    for i in range(N):
        for j in range(N):
            if approx.R[i][j] is not None:
                bj = blocks[j]
                R_full[i, :, bj, bj] = approx.R[i][j]
                r_full[i, :, bj] = approx.r[i][j]

    P, alpha, Z_hist, zeta_hist, fail = _kernels.backward_pass(
        np.ascontiguousarray(approx.A), B_all, offs,
        np.ascontiguousarray(approx.Q), np.ascontiguousarray(approx.l),
        R_full, r_full,
        np.ascontiguousarray(approx.Q_terminal),
        np.ascontiguousarray(approx.l_terminal),
    )
    if fail >= 0:
        raise SingularStageError(int(fail))

    strategies = [
        AffineStrategy(P[:, b, :].copy(), alpha[:, b].copy()) for b in blocks
    ]
    if return_value_functions:
        values = [ValueFunctionQuadratic(Z_hist[i], zeta_hist[i]) for i in range(N)]
        return strategies, values
    return strategies


def best_response(approx: LQApproximation, strategies, player: int) -> AffineStrategy:
    """Exact optimal strategy of one player against fixed opponents.

    Holds every other player ``j`` at its affine strategy, absorbs those
    strategies into the dynamics (closing ``A`` over their feedback, turning
    their feedforwards into an affine drift) and into player ``player``'s
    stage cost (mapping any ``R_ij``/``r_ij`` terms through ``P_j, a_j``),
    then solves the remaining single-player affine-LQR problem exactly.

    At a feedback-Nash solution this reproduces the player's own strategy,
    which makes it the equilibrium certificate used by the test suite.

    Args:
        approx: the stagewise LQ game data.
        strategies: per-player strategies (covering all players).
        player: 1-based player index.

    Returns:
        The optimal :class:`~ilqnash.strategies.AffineStrategy` for the player.
    """
    N = approx.num_players
    if not 1 <= player <= N:
        raise GameDefinitionError(f"player index {player} out of range [1, {N}]")
    if len(strategies) != N:
        raise GameDefinitionError(
            f"got {len(strategies)} strategies for {N} players"
        )
    i = player - 1
    T, n = approx.horizon, approx.state_dim
    mi = approx.control_dims[i]
    Bi = approx.B[i]

    # Closed-loop dynamics over the opponents, with affine drift.
    A_cl = approx.A.copy()
    c_cl = np.zeros((T, n))
    for j in range(N):
        if j == i:
            continue
        A_cl -= approx.B[j] @ strategies[j].P
        c_cl -= np.einsum("tnk,tk->tn", approx.B[j], strategies[j].alpha)

    # Opponent control costs of this player become state costs.
    Q_eff = approx.Q[i].copy()
    l_eff = approx.l[i].copy()
    for j in range(N):
        if j == i or approx.R[i][j] is None:
            continue
        Pj, aj = strategies[j].P, strategies[j].alpha
        Rij, rij = approx.R[i][j], approx.r[i][j]
        Q_eff += np.einsum("tkn,tkl,tlm->tnm", Pj, Rij, Pj)
        l_eff += np.einsum("tkn,tk->tn", Pj,
                           np.einsum("tkl,tl->tk", Rij, aj) - rij)

    Rii, rii = approx.R[i][i], approx.r[i][i]
    Z = 0.5 * (approx.Q_terminal[i] + approx.Q_terminal[i].T)
    zeta = approx.l_terminal[i].copy()
    P_out = np.empty((T, mi, n))
    a_out = np.empty((T, mi))
    for t in range(T - 1, -1, -1):
        BiT_Z = Bi[t].T @ Z
        G = Rii[t] + BiT_Z @ Bi[t]
        rhs = np.empty((mi, n + 1))
        rhs[:, :n] = BiT_Z @ A_cl[t]
        rhs[:, n] = Bi[t].T @ (zeta + Z @ c_cl[t]) + rii[t]
        try:
            sol = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularStageError(t) from exc
        P_out[t] = sol[:, :n]
        a_out[t] = sol[:, n]

        F = A_cl[t] - Bi[t] @ P_out[t]
        drift = c_cl[t] - Bi[t] @ a_out[t]
        Z_new = Q_eff[t] + P_out[t].T @ Rii[t] @ P_out[t] + F.T @ Z @ F
        zeta = l_eff[t] + P_out[t].T @ (Rii[t] @ a_out[t] - rii[t]) \
            + F.T @ (zeta + Z @ drift)
        Z = 0.5 * (Z_new + Z_new.T)
    return AffineStrategy(P_out, a_out)
