import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_params, random_point, random_points
from mlsw import DepthLoss, StateU, StateV, derive_params
from mlsw.core import layer_depths
from mlsw.changevar import delta_h_inverse, jacobian_F, jacobian_Finv, u_to_v, v_to_u


def test_hand_evaluated_two_layer_case():
    p = derive_params(2, 2, [1, 1], [1], 0.1)
    U = np.array([0, 0, 1, 0, 0, 0], dtype=float)   # u_1 = (1, 0), u_2 = 0
    V = u_to_v(p, U)
    # layout (s, zeta_2, vx_2, wx, vy_2, wy)
    np.testing.assert_allclose(V, [0, 0, -0.99, 1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(v_to_u(p, V), U, atol=1e-15)


def test_uniform_flow_telescopes():
    p = derive_params(3, 1, [1, 2, 0.5], [0.2, 0.8], 0.3)
    U = np.array([0, 0, 0, 0.4, 0.4, 0.4])
    V = u_to_v(p, U)
    np.testing.assert_allclose(V[3:5], 0.3**2 * p.r * 0.4, atol=1e-15)
    assert V[5] == pytest.approx(3.5 * 0.4)


def test_pure_flux_inverts_to_weighted_velocities():
    p = derive_params(3, 1, [1, 2, 0.5], [0.2, 0.8], 0.3)
    V = np.array([0, 0, 0, 0, 0, 0.7])
    expected = 0.7 / p.gamma / np.sum(p.delta / p.gamma)
    np.testing.assert_allclose(v_to_u(p, V)[3:], expected, rtol=1e-14)


def test_state_objects_are_accepted(rng):
    p = derive_params(2, 2, [1, 1], [1], 0.2)
    arr = 0.05 * rng.normal(size=(p.nvar, 8, 8))
    V = u_to_v(p, StateU.from_array(p, arr))
    assert isinstance(V, StateV)
    np.testing.assert_allclose(v_to_u(p, V).to_array(), arr, atol=1e-14)


def test_depth_loss_reports_layer():
    p = derive_params(2, 1, [1, 1], [1], 0.1)
    U = np.array([0.0, 1.5, 0.0, 0.0])   # zeta_2 = 1.5 empties layer 1
    with pytest.raises(DepthLoss) as info:
        u_to_v(p, U)
    assert info.value.layer == 1


@given(N=st.integers(1, 4), d=st.integers(1, 2), seed=st.integers(0, 2**20))
@settings(max_examples=80, deadline=None)
def test_roundtrip_property(N, d, seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, N, d)
    U = random_point(rng, p, 0.2)
    np.testing.assert_allclose(v_to_u(p, u_to_v(p, U)), U, atol=1e-12)


@pytest.mark.parametrize("N,d", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 1)])
def test_jacobians(N, d, rng):
    p = random_params(rng, N, d)
    U = random_point(rng, p)
    J = jacobian_Finv(p, U)
    eye = np.eye(p.nvar)
    step = 1e-6
    fd = np.stack([(u_to_v(p, U + step * e) - u_to_v(p, U - step * e)) / (2 * step)
                   for e in eye], axis=1)
    assert np.abs(J - fd).max() <= 1e-6 * np.abs(J).max()
    JF = jacobian_F(p, u_to_v(p, U))
    np.testing.assert_allclose(JF @ J, eye, atol=1e-12)
    np.testing.assert_allclose(JF, np.linalg.inv(J), atol=1e-12)


def test_single_layer_jacobians_at_rest():
    p = derive_params(1, 1, [2.0], [], 0.5)
    np.testing.assert_allclose(jacobian_Finv(p, np.zeros(2)), [[1, 0], [0, 2]])
    np.testing.assert_allclose(jacobian_F(p, np.zeros(2)), [[1, 0], [0, 0.5]])


def test_delta_h_inverse_batched(rng):
    p = random_params(rng, 3, 1)
    pts = random_points(rng, p, 10)
    J = jacobian_Finv(p, pts)
    h = layer_depths(p, pts.T).T
    block = J[:, 3:, 3:]
    np.testing.assert_allclose(delta_h_inverse(p, h) @ block, np.broadcast_to(np.eye(3), block.shape),
                               atol=1e-12)
