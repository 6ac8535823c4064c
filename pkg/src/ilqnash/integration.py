"""Fixed-step integrators and Jacobians of the resulting discrete step maps.

The discrete step is the object the rest of the library differentiates:
the LQ approximation linearizes ``x_next = step(x, u, t)`` directly, so the
chain rules here differentiate through the integrator stage by stage rather
than discretizing the continuous Jacobians. Controls are zero-order-hold
within a step.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import GameDefinitionError

INTEGRATORS = ("rk4", "euler")


def _check_method(method: str) -> str:
    if method not in INTEGRATORS:
        raise GameDefinitionError(
            f"unknown integrator '{method}', expected one of {INTEGRATORS}"
        )
    return method


def step_batch(model, xs, us, ts, dt, method="rk4"):
    """Advance ``K`` independent points one timestep of length ``dt``.

    Args:
        model: a :class:`~ilqnash.dynamics.DynamicsModel`.
        xs: states, shape ``(K, n)``.
        us: stacked controls, shape ``(K, m)``, held over the step.
        ts: times, shape ``(K,)``.
        dt: timestep in seconds, > 0.
        method: ``"rk4"`` (default) or ``"euler"``.

    Returns:
        Next states, shape ``(K, n)``.
    """
    _check_method(method)
    if dt <= 0:
        raise GameDefinitionError(f"timestep must be positive, got {dt}")
    f = model.vector_field_batch
    if method == "euler":
        return xs + dt * f(xs, us, ts)
    k1 = f(xs, us, ts)
    k2 = f(xs + (dt / 2) * k1, us, ts + dt / 2)
    k3 = f(xs + (dt / 2) * k2, us, ts + dt / 2)
    k4 = f(xs + dt * k3, us, ts + dt)
    return xs + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def step_point(model, x, us, t, dt, method="rk4"):
    """Single-point version of :func:`step_batch`; ``us`` is a per-player list."""
    u = model.partition.stack(us)
    x = np.asarray(x, dtype=float)
    return step_batch(model, x[None, :], u[None, :], np.array([float(t)]), dt, method)[0]


def step_jacobians_batch(model, xs, us, ts, dt, method="rk4"):
    """Jacobians of the discrete step map at ``K`` operating points.

    Differentiates the integrator exactly via the chain rule over its
    stages, using the model's continuous Jacobians. Block-diagonal product
    systems are handled subsystem by subsystem.

    Returns:
        ``(A, B)`` with shapes ``(K, n, n)`` and ``(K, n, m)`` (stacked
        control axis): ``A = d step/dx``, ``B = d step/du``.
    """
    _check_method(method)
    subsystems = getattr(model, "subsystems", None)
    if subsystems is None:
        return _chain_rule_batch(model, xs, us, ts, dt, method)

    # One small chain rule per subsystem block, assembled block-diagonally.
    K, n = xs.shape
    A = np.zeros((K, n, n))
    B = np.zeros((K, n, model.control_dim))
    for sub, s, cs in zip(subsystems, model.state_slices, model.partition.slices):
        As, Bs = _chain_rule_batch(sub, xs[:, s], us[:, cs], ts, dt, method)
        A[:, s, s] = As
        B[:, s, cs] = Bs
    return A, B


def _chain_rule_batch(model, xs, us, ts, dt, method):
    f = model.vector_field_batch
    jac = model.jacobians_batch
    K, n = xs.shape
    eye = np.broadcast_to(np.eye(n), (K, n, n))

    if method == "euler":
        fx, fu = jac(xs, us, ts)
        return eye + dt * fx, dt * fu

    h = dt
    t2 = ts + h / 2
    k1 = f(xs, us, ts)
    x2 = xs + (h / 2) * k1
    k2 = f(x2, us, t2)
    x3 = xs + (h / 2) * k2
    k3 = f(x3, us, t2)
    x4 = xs + h * k3

    fx1, fu1 = jac(xs, us, ts)
    fx2, fu2 = jac(x2, us, t2)
    fx3, fu3 = jac(x3, us, t2)
    fx4, fu4 = jac(x4, us, ts + h)

    if _kernels.NUMBA_AVAILABLE:
        return _kernels.rk4_jacobian_chain(fx1, fx2, fx3, fx4,
                                           fu1, fu2, fu3, fu4, h)

    K1x, K1u = fx1, fu1
    K2x = fx2 @ (eye + (h / 2) * K1x)
    K2u = fx2 @ ((h / 2) * K1u) + fu2
    K3x = fx3 @ (eye + (h / 2) * K2x)
    K3u = fx3 @ ((h / 2) * K2u) + fu3
    K4x = fx4 @ (eye + h * K3x)
    K4u = fx4 @ (h * K3u) + fu4

    A = eye + (h / 6) * (K1x + 2 * K2x + 2 * K3x + K4x)
    B = (h / 6) * (K1u + 2 * K2u + 2 * K3u + K4u)
    return A, B


def lti_discrete_matrices(A, Bs, dt, method="rk4"):
    """Exact discrete ``(A_d, [B_d_i])`` of an LTI field under a fixed-step integrator.

    For Euler: ``A_d = I + dt A``, ``B_d = dt B``. For RK4 the step of an LTI
    system is the degree-4 Taylor polynomial of the matrix exponential,
    ``A_d = sum_{k<=4} (dt A)^k / k!``, with the matching control convolution
    ``B_d = dt (I + dt A/2 + (dt A)^2/6 + (dt A)^3/24) B``. Used by tests as
    an independent reference for the chain-rule linearization.
    """
    _check_method(method)
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if method == "euler":
        return np.eye(n) + dt * A, [dt * np.asarray(B, dtype=float) for B in Bs]
    dA = dt * A
    dA2 = dA @ dA
    dA3 = dA2 @ dA
    Ad = np.eye(n) + dA + dA2 / 2 + dA3 / 6 + (dA3 @ dA) / 24
    conv = dt * (np.eye(n) + dA / 2 + dA2 / 6 + dA3 / 24)
    return Ad, [conv @ np.asarray(B, dtype=float) for B in Bs]
