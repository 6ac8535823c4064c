"""Independent oracles and random-game generators shared across tests.

Everything here is deliberately written without reusing the library's
solver/derivative code paths: finite differences for Jacobians and
Hessians, a completion-of-squares Riccati recursion for LQR, and fine-step
Euler integration as the integrator reference.
"""

import numpy as np

from ilqnash.approximation import LQApproximation


def fd_jacobian(f, z, h=1e-6):
    """Central-difference Jacobian of a vector-valued function."""
    z = np.asarray(z, dtype=float)
    f0 = np.asarray(f(z))
    J = np.empty((f0.size, z.size))
    for j in range(z.size):
        e = np.zeros(z.size)
        e[j] = h
        J[:, j] = (np.asarray(f(z + e)) - np.asarray(f(z - e))) / (2 * h)
    return J


def fd_gradient(f, z, h=1e-6):
    z = np.asarray(z, dtype=float)
    g = np.empty(z.size)
    for j in range(z.size):
        e = np.zeros(z.size)
        e[j] = h
        g[j] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def fd_hessian(f, z, h=1e-4):
    """Central-difference Hessian (4-point mixed formula)."""
    z = np.asarray(z, dtype=float)
    d = z.size
    H = np.empty((d, d))
    f0 = f(z)
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = h
        H[a, a] = (f(z + ea) - 2 * f0 + f(z - ea)) / (h * h)
        for b in range(a + 1, d):
            eb = np.zeros(d)
            eb[b] = h
            mixed = (f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb)
                     + f(z - ea - eb)) / (4 * h * h)
            H[a, b] = mixed
            H[b, a] = mixed
    return H


def fine_euler(field, x0, u, t0, dt, substeps=100):
    """Reference integration: many small Euler steps across one interval."""
    x = np.asarray(x0, dtype=float).copy()
    h = dt / substeps
    t = t0
    for _ in range(substeps):
        x = x + h * np.asarray(field(x, u, t))
        t += h
    return x


def riccati_affine_lqr(A, B, Q, l, R, r, QT, lT):
    """Independent discrete-time affine LQR via completion of squares.

    Minimizes ``sum_t 0.5 x^T Q_t x + l_t^T x + 0.5 u^T R_t u + r_t^T u``
    plus the terminal quadratic, subject to ``x' = A_t x + B_t u``. Returns
    gains and feedforwards of the law ``u = -K_t x - k_t``.

    Uses ``Z' = Q + A^T Z A - M^T G^{-1} M`` with ``G = R + B^T Z B`` and
    ``M = B^T Z A`` (a different algebraic route than the solver's
    closed-loop expansion).
    """
    T = len(A)
    n = A[0].shape[0]
    m = B[0].shape[1]
    Z = QT.copy()
    zeta = lT.copy()
    K = np.empty((T, m, n))
    k = np.empty((T, m))
    for t in range(T - 1, -1, -1):
        G = R[t] + B[t].T @ Z @ B[t]
        M = B[t].T @ Z @ A[t]
        s = B[t].T @ zeta + r[t]
        Ginv = np.linalg.inv(G)
        K[t] = Ginv @ M
        k[t] = Ginv @ s
        Z = Q[t] + A[t].T @ Z @ A[t] - M.T @ Ginv @ M
        Z = 0.5 * (Z + Z.T)
        zeta = l[t] + A[t].T @ zeta - M.T @ (Ginv @ s)
    return K, k


def random_unicycle_trajectory(scenario, rng, min_separation=0.4):
    """Random operating point for derivative comparisons on unicycle games.

    Players stay inside the corridor (when the scenario has one), within
    the speed band, not too close to each other (finite-difference
    truncation error of the proximity Hessian grows like 1/d^3), and clear
    of every hinge boundary by more than the widest difference stencil
    (one-sided second derivatives and stencils straddling a kink must
    disagree).
    """
    problem = scenario.problem
    cfg = scenario.config
    radius = float(cfg["proximity"]["radius"])
    if scenario.corridor:
        y_lo, y_hi = scenario.corridor[0] + 0.3, scenario.corridor[1] - 0.3
    else:
        y_lo, y_hi = -5.0, 5.0
    speed = cfg.get("speed_bounds", {})
    v_lo = (speed.get("lower", -2.0) if speed else -2.0) + 0.3
    v_hi = (speed.get("upper", 2.0) if speed else 2.0) - 0.3

    T, n = problem.horizon, problem.state_dim
    players = problem.num_players
    while True:
        states = np.empty((T + 1, n))
        for p in range(players):
            states[:, 4 * p] = rng.uniform(-5, 5, size=T + 1)
            states[:, 4 * p + 1] = rng.uniform(y_lo, y_hi, size=T + 1)
            states[:, 4 * p + 2] = rng.uniform(-3.0, 3.0, size=T + 1)
            states[:, 4 * p + 3] = rng.uniform(v_lo, v_hi, size=T + 1)
        ok = True
        for a in range(players):
            for b in range(a + 1, players):
                d = np.hypot(states[:, 4 * a] - states[:, 4 * b],
                             states[:, 4 * a + 1] - states[:, 4 * b + 1])
                if np.any(d < min_separation) or np.any(np.abs(d - radius) < 2.5e-2):
                    ok = False
        if ok:
            controls = rng.uniform(-1.5, 1.5, size=(T, problem.control_dim))
            from ilqnash import SystemTrajectory

            return SystemTrajectory(states, controls, problem.dt)




def random_psd(rng, d, floor=0.0):
    M = rng.standard_normal((d, d))
    return M @ M.T + floor * np.eye(d)


def random_lq_game(rng, num_players, n=None, m_max=2, T=None,
                   with_linear_terms=True):
    """Random time-varying LQ game data with well-posed costs.

    State dimension <= 4, control dimensions <= ``m_max``, horizon <= 10;
    ``Q >= 0`` and ``R_ii > 0`` by construction. Returns an
    :class:`LQApproximation` (off-diagonal ``R_ij`` left empty).
    """
    n = int(rng.integers(1, 5)) if n is None else n
    T = int(rng.integers(2, 11)) if T is None else T
    mdims = [int(rng.integers(1, m_max + 1)) for _ in range(num_players)]

    A = 0.9 * rng.standard_normal((T, n, n))
    B = [rng.standard_normal((T, n, m)) for m in mdims]
    Q = np.empty((num_players, T, n, n))
    l = np.zeros((num_players, T, n))
    R = [[None] * num_players for _ in range(num_players)]
    r = [[None] * num_players for _ in range(num_players)]
    for i in range(num_players):
        for t in range(T):
            Q[i, t] = random_psd(rng, n)
        if with_linear_terms:
            l[i] = rng.standard_normal((T, n))
        R[i][i] = np.empty((T, mdims[i], mdims[i]))
        for t in range(T):
            R[i][i][t] = random_psd(rng, mdims[i], floor=0.5)
        r[i][i] = rng.standard_normal((T, mdims[i])) if with_linear_terms \
            else np.zeros((T, mdims[i]))
    QT = np.stack([random_psd(rng, n) for _ in range(num_players)])
    lT = rng.standard_normal((num_players, n)) if with_linear_terms \
        else np.zeros((num_players, n))
    return LQApproximation(A, B, Q, l, R, r, QT, lT, mdims)
