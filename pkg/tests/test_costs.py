import numpy as np
import pytest

import ilqnash as iq
from ilqnash.costs import QuadraticAccumulator

from helpers import fd_gradient, fd_hessian


def test_proximity_outside_radius_is_zero():
    assert iq.proximity_cost([0.0, 0.0], [1.5, 0.0], radius=1.0, weight=2.0) == 0.0


def test_proximity_at_coincidence_is_finite():
    assert iq.proximity_cost([0.0, 0.0], [0.0, 0.0], radius=1.0, weight=2.0) == 2.0


def test_proximity_continuous_at_radius():
    d_bar = 1.0
    lo = iq.proximity_cost([0.0, 0.0], [d_bar - 1e-6, 0.0], d_bar, 5.0)
    hi = iq.proximity_cost([0.0, 0.0], [d_bar + 1e-6, 0.0], d_bar, 5.0)
    assert abs(lo - hi) < 1e-10


def test_goal_cost_values():
    assert iq.goal_cost([0.0, 0.0], [0.0, 0.0], 1.0) == 0.0
    assert iq.goal_cost([1.0, 1.0], [0.0, 0.0], 1.0) == pytest.approx(2.0)


def test_goal_cost_inactive_before_activation():
    term = iq.GoalCost((0, 1), [3.0, 4.0], weight=2.0, t_activate=5.0)
    xs = np.array([[0.0, 0.0]])
    assert term.value_batch(xs, None, np.array([4.9]))[0] == 0.0
    assert term.value_batch(xs, None, np.array([5.0]))[0] == pytest.approx(50.0)


def test_input_cost_values_and_gradient():
    assert iq.input_cost([0.0, 0.0], np.diag([2.0, 1.0])) == 0.0
    assert iq.input_cost([1.0, 2.0], np.diag([2.0, 1.0])) == pytest.approx(3.0)
    rng = np.random.default_rng(21)
    W = np.diag([2.0, 1.0])
    u = rng.standard_normal(2)
    grad = fd_gradient(lambda z: iq.input_cost(z, W), u)
    assert np.max(np.abs(grad - W @ u)) < 1e-8


def _accumulate(term, x, us=None, t=0.0, n=None, control_dims=(2,)):
    n = len(x) if n is None else n
    acc = QuadraticAccumulator(1, n, list(control_dims))
    xs = np.asarray(x, dtype=float)[None, :]
    uss = None if us is None else np.asarray(us, dtype=float)[None, :]
    ts = None if t is None else np.array([t])
    term.quadraticize_batch(xs, uss, ts, acc, player=1)
    return acc


def test_proximity_quadraticization_matches_finite_differences():
    rng = np.random.default_rng(22)
    term = iq.ProximityCost((0, 1), (2, 3), radius=1.0, weight=5.0)
    # Sample a state with the pair inside the radius but not too close.
    x = np.array([0.1, -0.2, 0.5, 0.3])

    def value(z):
        return term.value_batch(z[None, :], None, None)[0]

    acc = _accumulate(term, x)
    grad = fd_gradient(value, x)
    hess = fd_hessian(value, x)
    assert np.max(np.abs(acc.l[0] - grad)) < 1e-4 * max(1.0, np.max(np.abs(grad)))
    assert np.max(np.abs(acc.Q[0] - hess)) < 1e-4 * max(1.0, np.max(np.abs(hess)))


def test_proximity_quadraticization_raises_at_coincidence():
    term = iq.ProximityCost((0, 1), (2, 3), radius=1.0, weight=5.0)
    x = np.array([0.3, 0.4, 0.3, 0.4])
    with pytest.raises(iq.CostDerivativeError) as err:
        _accumulate(term, x, t=0.0)
    assert err.value.player == 1
    assert err.value.term == "proximity"
    assert err.value.step == 0


def test_soft_bound_hinge_and_derivatives():
    wall = iq.SoftBoundCost(1, lower=-1.5, upper=1.5, weight=3.0, name="corridor_wall")
    inside = np.array([[0.0, 0.3]])
    outside = np.array([[0.0, 2.0]])
    assert wall.value_batch(inside, None, None)[0] == 0.0
    assert wall.value_batch(outside, None, None)[0] == pytest.approx(3.0 * 0.25)
    # C1 at the boundary: values straddling it differ negligibly.
    lo = wall.value_batch(np.array([[0.0, 1.5 - 1e-6]]), None, None)[0]
    hi = wall.value_batch(np.array([[0.0, 1.5 + 1e-6]]), None, None)[0]
    assert abs(hi - lo) < 1e-10
    x = np.array([0.0, 2.2])
    acc = _accumulate(wall, x)
    grad = fd_gradient(lambda z: wall.value_batch(z[None, :], None, None)[0], x)
    assert np.max(np.abs(acc.l[0] - grad)) < 1e-8


def test_proximity_gradient_continuous_at_activation_boundary():
    # C1 at d = d_bar: numeric gradients just inside and outside the radius
    # converge to the same (zero) limit.
    term = iq.ProximityCost((0, 1), (2, 3), radius=1.0, weight=5.0)

    def value(z):
        return term.value_batch(z[None, :], None, None)[0]

    delta = 1e-6
    inside = np.array([0.0, 0.0, 1.0 - delta, 0.0])
    outside = np.array([0.0, 0.0, 1.0 + delta, 0.0])
    g_in = fd_gradient(value, inside, h=1e-8)
    g_out = fd_gradient(value, outside, h=1e-8)
    assert np.max(np.abs(g_in - g_out)) < 1e-4


def test_soft_bound_gradient_continuous_at_boundary():
    wall = iq.SoftBoundCost(0, lower=None, upper=1.5, weight=5.0)

    def value(z):
        return wall.value_batch(z[None, :], None, None)[0]

    delta = 1e-6
    g_in = fd_gradient(value, np.array([1.5 - delta]), h=1e-8)
    g_out = fd_gradient(value, np.array([1.5 + delta]), h=1e-8)
    assert np.max(np.abs(g_in - g_out)) < 1e-4


def test_control_effort_quadraticization_is_exact():
    W = np.array([[2.0, 0.5], [0.5, 1.0]])
    term = iq.ControlEffortCost(0, W, slice(0, 2))
    u = np.array([0.7, -1.3])
    acc = _accumulate(term, np.zeros(4), us=u)
    r, R = acc.blocks[0]
    assert np.allclose(R[0], W)
    assert np.allclose(r[0], W @ u)
    assert not acc.l.any() and not acc.Q.any()


def test_quadratic_state_cost_exact():
    W = np.diag([2.0, 4.0])
    target = np.array([1.0, -1.0])
    term = iq.QuadraticStateCost(W, target)
    x = np.array([3.0, 2.0])
    assert term.value_batch(x[None, :], None, None)[0] == pytest.approx(
        0.5 * (x - target) @ W @ (x - target))
    acc = _accumulate(term, x)
    assert np.allclose(acc.Q[0], W)
    assert np.allclose(acc.l[0], W @ (x - target))


def test_builtin_stage_costs_nonnegative_and_zero_on_nominal_set(hallway):
    rng = np.random.default_rng(23)
    problem = hallway.problem
    ts = problem.stage_times()
    for _ in range(50):
        xs = rng.uniform(-6, 6, size=(1, 12))
        us = rng.uniform(-3, 3, size=(1, 6))
        for cost in problem.costs:
            assert cost.stage_batch(xs, us, ts[:1])[0] >= 0.0
            assert cost.terminal(xs[0]) >= 0.0
    # Zero exactly on the nominal set: at goal, far apart, zero input.
    goals = hallway.goals
    x = np.zeros(12)
    for i, g in enumerate(goals):
        x[4 * i:4 * i + 2] = g
        x[4 * i + 2] = 0.0
        x[4 * i + 3] = 1.0  # inside the speed band
    # Spread players far apart vertically? They are at their goals; goal
    # positions are > radius apart in this scenario.
    u = np.zeros(6)
    for cost in problem.costs:
        assert cost.stage(x, problem.partition.split(u), ts[-1]) == pytest.approx(0.0)
        assert cost.terminal(x) == pytest.approx(0.0)


def test_composite_cost_stage_batch_matches_pointwise(hallway):
    rng = np.random.default_rng(24)
    problem = hallway.problem
    xs = rng.uniform(-4, 4, size=(6, 12))
    us = rng.uniform(-2, 2, size=(6, 2 * 3))
    ts = 0.1 * np.arange(6) + 4.8
    split = problem.partition.split
    for cost in problem.costs:
        batch = cost.stage_batch(xs, us, ts)
        point = [cost.stage(xs[k], split(us[k]), ts[k]) for k in range(6)]
        assert np.allclose(batch, point, atol=1e-12)


def test_weight_validation():
    with pytest.raises(iq.GameDefinitionError):
        iq.ProximityCost((0, 1), (2, 3), radius=-1.0, weight=1.0)
    with pytest.raises(iq.GameDefinitionError):
        iq.GoalCost((0, 1), [0.0, 0.0], weight=-2.0)
    with pytest.raises(iq.GameDefinitionError):
        iq.SoftBoundCost(0, None, None, 1.0)
    with pytest.raises(iq.GameDefinitionError):
        iq.ControlEffortCost(0, np.array([[1.0, 0.2], [0.0, 1.0]]), slice(0, 2))
