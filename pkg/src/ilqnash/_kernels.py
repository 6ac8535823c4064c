"""Compiled inner-loop kernels.

The backward dynamic program and the forward rollout are the only
horizon-sequential loops in the library; both get JIT-compiled when numba
is available and run as plain Python otherwise. Results are the same either
way; compilation is purely a speedup and is invisible to the API.

The backward pass consumes each player's control-cost data in stacked form:
``R[i]`` is the ``(T, m, m)`` block-diagonal Hessian over the stacked
control vector (block ``(j, j)`` holding ``R_ij``) and ``r[i]`` the stacked
gradient, which turns the per-player sums of the cost-to-go updates into
single stacked matrix products. Matrix sizes are tiny (n <= ~20), so the
kernels use explicit loops and one in-place partial-pivot LU per stage
instead of library calls.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def _lu_solve(S, rhs):
    """Solve ``S x = rhs`` in place (both overwritten) by partial-pivot LU.

    Returns 0 on success, 1 when a pivot is exactly zero (singular stage).
    """
    m = S.shape[0]
    k = rhs.shape[1]
    for col in range(m):
        piv = col
        best = abs(S[col, col])
        for row in range(col + 1, m):
            mag = abs(S[row, col])
            if mag > best:
                best = mag
                piv = row
        if best == 0.0:
            return 1
        if piv != col:
            for c in range(m):
                S[col, c], S[piv, c] = S[piv, c], S[col, c]
            for c in range(k):
                rhs[col, c], rhs[piv, c] = rhs[piv, c], rhs[col, c]
        inv = 1.0 / S[col, col]
        for row in range(col + 1, m):
            f = S[row, col] * inv
            if f != 0.0:
                for c in range(col + 1, m):
                    S[row, c] -= f * S[col, c]
                for c in range(k):
                    rhs[row, c] -= f * rhs[col, c]
    for col in range(m - 1, -1, -1):
        inv = 1.0 / S[col, col]
        for c in range(k):
            acc = rhs[col, c]
            for kk in range(col + 1, m):
                acc -= S[col, kk] * rhs[kk, c]
            rhs[col, c] = acc * inv
    return 0


@njit(cache=True)
def backward_pass(A, B, offs, Q, l, R, r, QT, lT):
    """Coupled feedback-Nash recursion over one horizon.

    Args:
        A: ``(T, n, n)`` state Jacobians of the discrete step.
        B: ``(T, n, m)`` stacked control Jacobians.
        offs: ``(N + 1,)`` player offsets into the stacked control axis.
        Q, l: ``(N, T, n, n)`` / ``(N, T, n)`` state cost data.
        R, r: ``(N, T, m, m)`` / ``(N, T, m)`` stacked control cost data.
        QT, lT: terminal state cost data.

    Per stage, with cost-to-go models ``(Z_i, zeta_i)`` seeded from the
    terminal costs, this solves the stacked control system

        S [P_1; ...; P_N] = [B_1^T Z_1 A; ...],  block (i,j) of S being
        R_ii [i = j] + B_i^T Z_i B_j, and the same system for the
        feedforwards with right-hand side B_i^T zeta_i + r_ii,

    then updates each cost-to-go through the closed loop
    ``F = A - B P``, ``beta = -B alpha``:

        Z_i <- Q_i + P^T R_i P + F^T Z_i F          (R_i block-diagonal)
        zeta_i <- l_i + P^T (R_i alpha - r_i) + F^T (zeta_i + Z_i beta)

    Returns:
        ``(P, alpha, Z, zeta, fail)`` with stacked gains ``(T, m, n)``,
        feedforwards ``(T, m)``, cost-to-go sequences ``(N, T + 1, ...)``,
        and ``fail`` the first stage whose stacked system was singular
        (``-1`` on success).
    """
    T, n = A.shape[0], A.shape[1]
    m = B.shape[2]
    N = offs.shape[0] - 1

    P = np.zeros((T, m, n))
    alpha = np.zeros((T, m))
    Z = np.empty((N, T + 1, n, n))
    zeta = np.empty((N, T + 1, n))
    for i in range(N):
        for a in range(n):
            zeta[i, T, a] = lT[i, a]
            for b in range(n):
                Z[i, T, a, b] = 0.5 * (QT[i, a, b] + QT[i, b, a])

    S = np.empty((m, m))
    rhs = np.empty((m, n + 1))
    BZ = np.empty((m, n))
    F = np.empty((n, n))
    beta = np.empty(n)
    ZF = np.empty((n, n))
    RP = np.empty((m, n))
    Ra = np.empty(m)
    zb = np.empty(n)
    Zn = np.empty((n, n))

    BT = np.empty((m, n))

    fail = -1
    for t in range(T - 1, -1, -1):
        for row in range(m):
            for c in range(n):
                BT[row, c] = B[t, c, row]

        # Stacked system: rows of player i use its own Z_i.
        for i in range(N):
            for row in range(offs[i], offs[i + 1]):
                for c in range(n):
                    BZ[row, c] = 0.0
                for kk in range(n):
                    bv = BT[row, kk]
                    if bv != 0.0:
                        for c in range(n):
                            BZ[row, c] += bv * Z[i, t + 1, kk, c]
            for row in range(offs[i], offs[i + 1]):
                for c in range(m):
                    S[row, c] = R[i, t, row, c]
                for c in range(n):
                    rhs[row, c] = 0.0
                for kk in range(n):
                    bz = BZ[row, kk]
                    for c in range(m):
                        S[row, c] += bz * B[t, kk, c]
                    for c in range(n):
                        rhs[row, c] += bz * A[t, kk, c]
                acc = r[i, t, row]
                for kk in range(n):
                    acc += BT[row, kk] * zeta[i, t + 1, kk]
                rhs[row, n] = acc

        if _lu_solve(S, rhs) != 0:
            fail = t
            break
        for row in range(m):
            for c in range(n):
                P[t, row, c] = rhs[row, c]
            alpha[t, row] = rhs[row, n]

        # Closed loop: F = A - B P, beta = -B alpha.
        for row in range(n):
            for c in range(n):
                F[row, c] = A[t, row, c]
            acc = 0.0
            for kk in range(m):
                bv = B[t, row, kk]
                acc += bv * alpha[t, kk]
                for c in range(n):
                    F[row, c] -= bv * P[t, kk, c]
            beta[row] = -acc

        for i in range(N):
            # RP = R_i P, Ra = R_i alpha - r_i (stacked over all controls).
            for row in range(m):
                acc = -r[i, t, row]
                for c in range(n):
                    RP[row, c] = 0.0
                for kk in range(m):
                    rv = R[i, t, row, kk]
                    if rv != 0.0:
                        acc += rv * alpha[t, kk]
                        for c in range(n):
                            RP[row, c] += rv * P[t, kk, c]
                Ra[row] = acc
            # ZF = Z_i F and zb = zeta_i + Z_i beta.
            for row in range(n):
                acc = zeta[i, t + 1, row]
                for c in range(n):
                    ZF[row, c] = 0.0
                for kk in range(n):
                    zv = Z[i, t + 1, row, kk]
                    acc += zv * beta[kk]
                    for c in range(n):
                        ZF[row, c] += zv * F[kk, c]
                zb[row] = acc
            # Z_i <- Q_i + P^T RP + F^T ZF, symmetrized;
            # zeta_i <- l_i + P^T Ra + F^T zb.
            for a in range(n):
                for b in range(n):
                    Zn[a, b] = Q[i, t, a, b]
                acc = l[i, t, a]
                for kk in range(m):
                    pv = P[t, kk, a]
                    acc += pv * Ra[kk]
                    for b in range(n):
                        Zn[a, b] += pv * RP[kk, b]
                for kk in range(n):
                    fv = F[kk, a]
                    acc += fv * zb[kk]
                    for b in range(n):
                        Zn[a, b] += fv * ZF[kk, b]
                zeta[i, t, a] = acc
            for a in range(n):
                for b in range(n):
                    Z[i, t, a, b] = 0.5 * (Zn[a, b] + Zn[b, a])
    return P, alpha, Z, zeta, fail


@njit(cache=True)
def _mm(X, Y, out):
    d, p = X.shape
    q = Y.shape[1]
    for a in range(d):
        for c in range(q):
            out[a, c] = 0.0
        for kk in range(p):
            xv = X[a, kk]
            if xv != 0.0:
                for c in range(q):
                    out[a, c] += xv * Y[kk, c]


@njit(cache=True)
def rk4_jacobian_chain(fx1, fx2, fx3, fx4, fu1, fu2, fu3, fu4, dt):
    """Combine continuous Jacobians at the four RK4 stage points into the
    Jacobians of the discrete step, batched over ``K`` operating points."""
    K, d = fx1.shape[0], fx1.shape[1]
    mm_ = fu1.shape[2]
    A = np.empty((K, d, d))
    Bo = np.empty((K, d, mm_))
    Tx = np.empty((d, d))
    Tu = np.empty((d, mm_))
    K2x = np.empty((d, d))
    K3x = np.empty((d, d))
    K4x = np.empty((d, d))
    K2u = np.empty((d, mm_))
    K3u = np.empty((d, mm_))
    K4u = np.empty((d, mm_))
    h = dt
    h2 = dt / 2
    for k in range(K):
        for a in range(d):
            for b in range(d):
                Tx[a, b] = h2 * fx1[k, a, b]
            Tx[a, a] += 1.0
        _mm(fx2[k], Tx, K2x)
        for a in range(d):
            for b in range(mm_):
                Tu[a, b] = h2 * fu1[k, a, b]
        _mm(fx2[k], Tu, K2u)
        for a in range(d):
            for b in range(mm_):
                K2u[a, b] += fu2[k, a, b]

        for a in range(d):
            for b in range(d):
                Tx[a, b] = h2 * K2x[a, b]
            Tx[a, a] += 1.0
        _mm(fx3[k], Tx, K3x)
        for a in range(d):
            for b in range(mm_):
                Tu[a, b] = h2 * K2u[a, b]
        _mm(fx3[k], Tu, K3u)
        for a in range(d):
            for b in range(mm_):
                K3u[a, b] += fu3[k, a, b]

        for a in range(d):
            for b in range(d):
                Tx[a, b] = h * K3x[a, b]
            Tx[a, a] += 1.0
        _mm(fx4[k], Tx, K4x)
        for a in range(d):
            for b in range(mm_):
                Tu[a, b] = h * K3u[a, b]
        _mm(fx4[k], Tu, K4u)
        for a in range(d):
            for b in range(mm_):
                K4u[a, b] += fu4[k, a, b]

        for a in range(d):
            for b in range(d):
                A[k, a, b] = (h / 6) * (fx1[k, a, b] + 2 * K2x[a, b]
                                        + 2 * K3x[a, b] + K4x[a, b])
            A[k, a, a] += 1.0
            for b in range(mm_):
                Bo[k, a, b] = (h / 6) * (fu1[k, a, b] + 2 * K2u[a, b]
                                         + 2 * K3u[a, b] + K4u[a, b])
    return A, Bo


@njit(cache=True)
def _unicycle_field(x, u, out, players):
    for i in range(players):
        b = 4 * i
        c = 2 * i
        v = x[b + 3]
        th = x[b + 2]
        out[b] = v * math.cos(th)
        out[b + 1] = v * math.sin(th)
        out[b + 2] = u[c]
        out[b + 3] = u[c + 1]


@njit(cache=True)
def unicycle_product_rollout(x0, ref_x, ref_u, P, alpha, scale, dt, use_rk4):
    """Affine-strategy rollout specialized to products of 4D unicycles.

    Mirrors the generic rollout exactly: the minus-gain control law followed
    by an RK4 (or Euler) step with zero-order-hold controls. Returns
    ``(states, controls, fail)`` where ``fail`` is the first timestep that
    produced a non-finite state (``-1`` when none did).
    """
    T = ref_u.shape[0]
    n = x0.shape[0]
    m = ref_u.shape[1]
    players = n // 4
    states = np.empty((T + 1, n))
    controls = np.empty((T, m))
    for j in range(n):
        states[0, j] = x0[j]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xa = np.empty(n)
    u = np.empty(m)
    for t in range(T):
        x = states[t]
        for row in range(m):
            acc = ref_u[t, row] - scale * alpha[t, row]
            for kk in range(n):
                acc -= P[t, row, kk] * (x[kk] - ref_x[t, kk])
            u[row] = acc
            controls[t, row] = acc
        _unicycle_field(x, u, k1, players)
        if use_rk4:
            for j in range(n):
                xa[j] = x[j] + (dt / 2) * k1[j]
            _unicycle_field(xa, u, k2, players)
            for j in range(n):
                xa[j] = x[j] + (dt / 2) * k2[j]
            _unicycle_field(xa, u, k3, players)
            for j in range(n):
                xa[j] = x[j] + dt * k3[j]
            _unicycle_field(xa, u, k4, players)
            for j in range(n):
                states[t + 1, j] = x[j] + (dt / 6) * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
        else:
            for j in range(n):
                states[t + 1, j] = x[j] + dt * k1[j]
        for j in range(n):
            if not np.isfinite(states[t + 1, j]):
                return states, controls, t
    return states, controls, -1


def warm_up():
    """Trigger JIT compilation of all kernels on tiny inputs."""
    if not NUMBA_AVAILABLE:
        return
    T, n, m = 2, 4, 2
    A = np.tile(np.eye(n), (T, 1, 1))
    B = np.ones((T, n, m)) * 0.1
    offs = np.array([0, 1, 2], dtype=np.int64)
    Q = np.tile(np.eye(n), (2, T, 1, 1))
    l = np.zeros((2, T, n))
    R = np.tile(np.eye(m), (2, T, 1, 1))
    r = np.zeros((2, T, m))
    backward_pass(A, B, offs, Q, l, R, r, np.ascontiguousarray(Q[:, 0]),
                  np.ascontiguousarray(l[:, 0]))
    unicycle_product_rollout(
        np.zeros(4), np.zeros((T + 1, 4)), np.zeros((T, 2)),
        np.zeros((T, 2, 4)), np.zeros((T, 2)), 1.0, 0.1, True,
    )
    fx = np.zeros((T, n, n))
    fu = np.zeros((T, n, m))
    rk4_jacobian_chain(fx, fx, fx, fx, fu, fu, fu, fu, 0.1)
