import numpy as np
import pytest

import ilqnash as iq
from ilqnash.dynamics import ControlPartition

from helpers import fd_jacobian


def test_unicycle_field_at_zero_heading():
    uni = iq.UnicycleModel()
    xdot = iq.evaluate_dynamics(uni, [0.0, 0.0, 0.0, 1.0], [[0.0, 0.0]])
    assert np.allclose(xdot, [1.0, 0.0, 0.0, 0.0])


def test_unicycle_field_at_quarter_turn():
    uni = iq.UnicycleModel()
    xdot = iq.evaluate_dynamics(uni, [0.0, 0.0, np.pi / 2, 2.0], [[0.3, -0.1]])
    assert np.allclose(xdot, [0.0, 2.0, 0.3, -0.1], atol=1e-15)


def test_product_system_equals_subsystem_loop():
    rng = np.random.default_rng(3)
    subs = [iq.UnicycleModel() for _ in range(3)]
    product = iq.ProductSystem(subs)
    x = rng.standard_normal(12)
    us = [rng.standard_normal(2) for _ in range(3)]
    joint = iq.evaluate_dynamics(product, x, us, 0.0)
    blockwise = np.concatenate(
        [sub.vector_field(x[4 * i:4 * i + 4], [us[i]]) for i, sub in enumerate(subs)]
    )
    assert np.array_equal(joint, blockwise)


def test_product_system_batch_matches_pointwise():
    rng = np.random.default_rng(4)
    product = iq.ProductSystem([iq.UnicycleModel() for _ in range(2)])
    xs = rng.standard_normal((7, 8))
    us = rng.standard_normal((7, 4))
    ts = np.zeros(7)
    batch = product.vector_field_batch(xs, us, ts)
    for k in range(7):
        point = product.vector_field(xs[k], product.partition.split(us[k]), 0.0)
        assert np.allclose(batch[k], point, atol=1e-15)


def test_unicycle_jacobians_match_finite_differences():
    rng = np.random.default_rng(5)
    uni = iq.UnicycleModel()
    x = rng.standard_normal(4)
    u = rng.standard_normal(2)
    fx, (fu,) = uni.jacobians(x, [u])
    fx_fd = fd_jacobian(lambda z: uni.vector_field(z, [u]), x)
    fu_fd = fd_jacobian(lambda z: uni.vector_field(x, [z]), u)
    assert np.max(np.abs(fx - fx_fd)) < 1e-9
    assert np.max(np.abs(fu - fu_fd)) < 1e-9


def test_linear_model_field_and_jacobians():
    A = np.array([[0.0, 1.0], [-0.5, 0.0]])
    B1 = np.array([[0.0], [1.0]])
    B2 = np.array([[1.0], [0.0]])
    model = iq.LinearSystemModel(A, [B1, B2])
    x = np.array([1.0, 2.0])
    xdot = iq.evaluate_dynamics(model, x, [[3.0], [4.0]])
    assert np.allclose(xdot, A @ x + B1 @ [3.0] + B2 @ [4.0])
    fx, fus = model.jacobians(x, [[3.0], [4.0]])
    assert np.array_equal(fx, A)
    assert np.array_equal(fus[0], B1) and np.array_equal(fus[1], B2)


def test_control_partition_roundtrip():
    part = ControlPartition([2, 1, 3])
    assert part.total == 6
    assert part.offsets == (0, 2, 3)
    us = [np.array([1.0, 2.0]), np.array([3.0]), np.array([4.0, 5.0, 6.0])]
    stacked = part.stack(us)
    assert np.array_equal(stacked, [1, 2, 3, 4, 5, 6])
    back = part.split(stacked)
    for a, b in zip(us, back):
        assert np.array_equal(a, b)


def test_dimension_mismatches_rejected():
    uni = iq.UnicycleModel()
    with pytest.raises(iq.GameDefinitionError):
        iq.evaluate_dynamics(uni, [0.0, 0.0, 0.0], [[0.0, 0.0]])
    with pytest.raises(iq.GameDefinitionError):
        iq.evaluate_dynamics(uni, [0.0, 0.0, 0.0, 0.0], [[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(iq.GameDefinitionError):
        ControlPartition([2, 0])
    with pytest.raises(iq.GameDefinitionError):
        iq.LinearSystemModel(np.zeros((2, 3)), [np.zeros((2, 1))])
    with pytest.raises(iq.GameDefinitionError):
        iq.ProductSystem([])
    with pytest.raises(iq.GameDefinitionError):
        iq.ProductSystem([iq.LinearSystemModel(np.zeros((2, 2)),
                                               [np.zeros((2, 1)), np.zeros((2, 1))])])


def test_position_indices_follow_state_offsets():
    product = iq.ProductSystem([iq.UnicycleModel() for _ in range(3)])
    assert product.position_indices(0) == (0, 1)
    assert product.position_indices(2) == (8, 9)
    assert product.state_dim == 12
    assert product.control_dims == (2, 2, 2)
