import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandit_subset.reward_model import (
    ActionSpace,
    DiscreteInstances,
    Gibbs,
    LinearCanonicalModel,
    RBF,
    build_kernel_model,
    toy_model,
    expected_reward,
    jittered_cholesky,
    kernel_value,
    make_grid_space,
    make_orthonormal_space,
    make_sphere_clusters,
    BanditInstance,
)


def test_grid_includes_endpoints():
    space = make_grid_space(0.0, 2.0, 15)
    assert len(space) == 15 and space.dim == 1
    assert space.actions[0, 0] == 0.0 and space.actions[-1, 0] == 2.0


@pytest.mark.parametrize("lo,hi,n", [(0, 0, 5), (1, 0, 5), (0, 1, 1)])
def test_grid_rejects_degenerate(lo, hi, n):
    with pytest.raises(ValueError):
        make_grid_space(lo, hi, n)


def test_orthonormal_is_identity():
    assert np.array_equal(make_orthonormal_space(4).actions, np.eye(4))


def test_sphere_clusters_shape_and_norms(rng):
    space, part = make_sphere_clusters(0.1, rng)
    assert len(space) == 1000 and space.dim == 3
    assert np.allclose(np.linalg.norm(space.actions, axis=1), 1.0)
    assert len(part) == 5 and all(len(c) == 200 for c in part.clusters)
    with pytest.raises(ValueError):
        make_sphere_clusters(0.0, rng)


def test_actions_are_read_only():
    space = make_grid_space(0, 1, 3)
    with pytest.raises(ValueError):
        space.actions[0, 0] = 5.0


def test_toy_expected_rewards():
    model = toy_model()
    e1, e2 = BanditInstance(np.array([1.0, 0.0])), BanditInstance(np.array([0.0, 1.0]))
    assert [expected_reward(model, i, e1) for i in range(3)] == [1.0, 0.9, -0.1]
    assert [expected_reward(model, i, e2) for i in range(3)] == [0.0, 0.1, 1.0]
    with pytest.raises(IndexError):
        model.expected_reward(3, e1)
    with pytest.raises(ValueError):
        model.expected_reward(0, BanditInstance(np.ones(3)))


def test_discrete_weights_validated():
    with pytest.raises(ValueError):
        DiscreteInstances([[1.0], [2.0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteInstances([[1.0], [2.0]], [1.0])


def test_sampler_dimension_must_match():
    with pytest.raises(ValueError):
        LinearCanonicalModel(make_orthonormal_space(3), DiscreteInstances([[1.0, 0.0]]))


def test_rbf_closed_form():
    assert kernel_value(RBF(1.0), 0.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert kernel_value(RBF(0.5), [0.0, 0.0], [0.0, 1.0]) == pytest.approx(math.exp(-2.0))
    with pytest.raises(ValueError):
        RBF(0.0)
    with pytest.raises(ValueError):
        kernel_value(RBF(1.0), [0.0], [0.0, 1.0])


def test_gibbs_kernel_properties():
    g = Gibbs()
    assert g.length_scale([0.0])[0] == pytest.approx(1.0)
    assert g.length_scale([2.0])[0] == pytest.approx(0.1 + 0.9 * math.exp(-4.0))
    x = np.linspace(0, 2, 7)
    k = g.matrix(x, x)
    assert np.allclose(np.diag(k), 1.0)
    assert np.allclose(k, k.T)
    assert np.linalg.eigvalsh(k).min() > -1e-10
    # equal length scales reduce to the RBF form exp(-d^2 / (2 l^2))
    assert kernel_value(Gibbs(base=0.7, amp=0.0), 0.0, 1.0) == pytest.approx(math.exp(-1.0 / (2 * 0.49)))


def test_kernel_model_reproduces_kernel():
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(1.0))
    recon = model.features @ model.features.T
    assert np.allclose(recon, model.kernel_matrix, atol=1e-6)
    assert model.jitter > 0
    d = model.distance_matrix()
    assert d[0, -1] == pytest.approx(math.sqrt(2 - 2 * math.exp(-2.0)), rel=1e-12)


def test_kernel_model_sample_covariance(rng):
    model = build_kernel_model(make_grid_space(0, 2, 6), RBF(0.5))
    f = model.rewards(model.sample_thetas(rng, 40000))
    assert np.allclose(np.cov(f.T), model.kernel_matrix, atol=0.05)


def test_duplicate_grid_points_rejected():
    with pytest.raises(ValueError):
        build_kernel_model(np.array([0.0, 0.0, 1.0]), RBF(1.0))


def test_jitter_escalates_on_singular_matrix():
    # eigenvalues 4 and -1e-9: the starting jitter is not enough
    m = np.ones((4, 4)) - 1e-9 * np.eye(4)
    chol, jitter = jittered_cholesky(m)
    assert jitter > 1e-9
    assert np.allclose(chol @ chol.T, m, atol=1e-6)


def test_jitter_gives_up_on_indefinite_matrix():
    with pytest.raises(np.linalg.LinAlgError):
        jittered_cholesky(-np.eye(3))


def test_space_csv_format():
    text = make_grid_space(0, 1, 3).to_csv()
    assert text.splitlines() == ["idx,x0", "0,0.0", "1,0.5", "2,1.0"]


@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.floats(-2, 2),
)
def test_rewards_are_linear_in_theta(t1, t2, a):
    model = LinearCanonicalModel(ActionSpace(np.arange(12.0).reshape(4, 3) / 10))
    t1, t2 = np.array(t1), np.array(t2)
    assert np.allclose(model.rewards(a * t1 + t2), a * model.rewards(t1) + model.rewards(t2))
