import numpy as np
import pytest

import ilqnash as iq
from ilqnash import integration
from ilqnash.errors import GameDefinitionError

from helpers import fine_euler


class _ZeroField(iq.DynamicsModel):
    def __init__(self):
        super().__init__(state_dim=3, control_dims=[1])

    def vector_field(self, x, us, t=0.0):
        return np.zeros(3)


class _ScalarIntegrator(iq.DynamicsModel):
    """xdot = u."""

    def __init__(self):
        super().__init__(state_dim=1, control_dims=[1])

    def vector_field(self, x, us, t=0.0):
        return np.asarray(us[0], dtype=float)

    def jacobians(self, x, us, t=0.0):
        return np.zeros((1, 1)), [np.ones((1, 1))]


def test_zero_field_step_is_identity():
    model = _ZeroField()
    x = np.array([1.0, -2.0, 3.0])
    for method in ("rk4", "euler"):
        for dt in (0.01, 0.1, 2.0):
            assert np.array_equal(iq.discretize_step(model, x, [[0.0]], 0.0, dt, method), x)


def test_constant_derivative_exact_for_both_integrators():
    model = _ScalarIntegrator()
    for method in ("rk4", "euler"):
        x1 = iq.discretize_step(model, [0.0], [[1.0]], 0.0, 0.1, method)
        assert abs(x1[0] - 0.1) < 1e-15


def test_rk4_unicycle_matches_fine_euler_oracle():
    # Euler's global error is first order, so reaching 1e-6 against the
    # exact RK4 value needs ~1e4 substeps over dt = 0.1 here.
    uni = iq.UnicycleModel()
    x0 = np.array([0.0, 0.0, 0.0, 0.0])
    u = [np.array([0.0, 1.0])]
    got = iq.discretize_step(uni, x0, u, 0.0, 0.1, "rk4")
    ref = fine_euler(lambda x, uu, t: uni.vector_field(x, uu, t), x0, u, 0.0, 0.1,
                     substeps=10000)
    assert np.max(np.abs(got - ref)) < 1e-6


def test_rk4_more_accurate_than_euler_on_curved_motion():
    uni = iq.UnicycleModel()
    x0 = np.array([0.0, 0.0, 0.3, 1.5])
    u = [np.array([1.2, 0.4])]
    ref = fine_euler(lambda x, uu, t: uni.vector_field(x, uu, t), x0, u, 0.0, 0.1,
                     substeps=10000)
    err_rk4 = np.max(np.abs(iq.discretize_step(uni, x0, u, 0.0, 0.1, "rk4") - ref))
    err_euler = np.max(np.abs(iq.discretize_step(uni, x0, u, 0.0, 0.1, "euler") - ref))
    assert err_rk4 < 1e-5
    assert err_rk4 < err_euler / 100


def test_lti_discrete_matrices_match_chain_rule():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((3, 3))
    Bs = [rng.standard_normal((3, 1)), rng.standard_normal((3, 2))]
    model = iq.LinearSystemModel(A, Bs)
    xs = rng.standard_normal((4, 3))
    us = rng.standard_normal((4, 3))
    ts = np.zeros(4)
    for method in ("rk4", "euler"):
        Ad, Bd = integration.lti_discrete_matrices(A, Bs, 0.1, method)
        Ak, Bk = integration.step_jacobians_batch(model, xs, us, ts, 0.1, method)
        for k in range(4):
            assert np.max(np.abs(Ak[k] - Ad)) < 1e-12
            assert np.max(np.abs(Bk[k] - np.concatenate(Bd, axis=1))) < 1e-12


def test_time_varying_field_sampled_at_stage_times():
    class Drift(iq.DynamicsModel):
        def __init__(self):
            super().__init__(state_dim=1, control_dims=[1])

        def vector_field(self, x, us, t=0.0):
            return np.array([float(t)])

    model = Drift()
    dt = 0.2
    # Euler samples the left endpoint; RK4 integrates t exactly (poly deg 1).
    assert abs(iq.discretize_step(model, [0.0], [[0.0]], 1.0, dt, "euler")[0]
               - dt * 1.0) < 1e-15
    assert abs(iq.discretize_step(model, [0.0], [[0.0]], 1.0, dt, "rk4")[0]
               - (dt * 1.0 + dt * dt / 2)) < 1e-12


def test_unknown_integrator_rejected():
    with pytest.raises(GameDefinitionError):
        iq.discretize_step(_ZeroField(), np.zeros(3), [[0.0]], 0.0, 0.1, "rk2")
    with pytest.raises(GameDefinitionError):
        iq.discretize_step(_ZeroField(), np.zeros(3), [[0.0]], 0.0, -0.1)
