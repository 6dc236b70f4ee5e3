import numpy as np
import pytest

from comdp.filtering import (BeliefDistribution, bayes_update, belief_transition, filter_history,
                             initial_belief, is_infeasible, joint_update, obs_marginal, predictive)
from comdp.model import DiscretePomdp
from comdp.models import build_dyadic_density, build_sign_switch
from oracles import enumerate_posterior, random_model, random_stochastic


def static_model(Q, nx=2, Q0=None, cost=None):
    na, _, ny = np.shape(Q)
    return DiscretePomdp(
        states=[str(i) for i in range(nx)], observations=[str(i) for i in range(ny)],
        actions=[str(i) for i in range(na)],
        transition=np.broadcast_to(np.eye(nx), (na, nx, nx)), observation=Q,
        initial_observation=np.full((nx, ny), 1.0 / ny) if Q0 is None else Q0,
        prior=np.full(nx, 1.0 / nx), cost=np.zeros((nx, na)) if cost is None else cost,
        discount=0.9, cost_mode="P")


def test_joint_update_matches_triple_sum():
    rng = np.random.default_rng(0)
    m = random_model(rng, 3, 2, 3)
    z = rng.dirichlet(np.ones(3))
    for a in range(3):
        ref = np.zeros((3, 2))
        for x in range(3):
            for x2 in range(3):
                for y in range(2):
                    ref[x2, y] += z[x] * m.transition[a, x, x2] * m.observation[a, x2, y]
        np.testing.assert_allclose(joint_update(m, z, a), ref, atol=1e-15)
        np.testing.assert_allclose(joint_update(m, z, a).sum(axis=1), predictive(m, z, a), atol=1e-15)
        np.testing.assert_allclose(obs_marginal(m, z, a), ref.sum(axis=0), atol=1e-15)


def test_sign_switch_joint_and_marginal():
    m = build_sign_switch(4)
    for a_idx, a in enumerate(m.action_coords[:, 0]):
        R = joint_update(m, [0.5, 0.5], a_idx)
        q1 = abs(a) if a < 0 else a * a
        q2 = a * a if a < 0 else abs(a)
        assert R[0, 0] == pytest.approx(q1 / 2, abs=1e-15)
        assert obs_marginal(m, [0.5, 0.5], a_idx)[0] == pytest.approx((q1 + q2) / 2, abs=1e-15)


def test_identity_with_uninformative_observation():
    m = static_model([[[0.5, 0.5], [0.5, 0.5]]])
    np.testing.assert_array_equal(joint_update(m, [1, 0], 0), [[0.5, 0.5], [0, 0]])
    np.testing.assert_allclose(bayes_update(m, [0.3, 0.7], 0, 1), [0.3, 0.7])
    assert len(belief_transition(m, [0.3, 0.7], 0)) == 1


def test_observation_law_independent_of_state():
    rng = np.random.default_rng(1)
    law = rng.dirichlet(np.ones(3))
    m = random_model(rng, 3, 3, 2).with_(observation=np.broadcast_to(law, (2, 3, 3)))
    for _ in range(5):
        np.testing.assert_allclose(obs_marginal(m, rng.dirichlet(np.ones(3)), 1), law, atol=1e-15)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_dyadic_density_posteriors(n):
    m = build_dyadic_density(n)
    for cell in range(2 ** n):
        post = bayes_update(m, [0.5, 0.5], n, cell)
        want = [1 / 3, 2 / 3] if cell % 2 == 1 else [1.0, 0.0]
        np.testing.assert_allclose(post, want, atol=1e-12)
    q = belief_transition(m, [0.5, 0.5], 0)
    assert len(q) == 1
    np.testing.assert_allclose(q.support[0], [0.5, 0.5])


def test_zero_likelihood_returns_prior_belief():
    m = static_model([[[1.0, 0.0], [1.0, 0.0]]])
    z = np.array([0.2, 0.8])
    np.testing.assert_array_equal(bayes_update(m, z, 0, 1), z)


def test_perfect_observation_gives_point_masses():
    rng = np.random.default_rng(2)
    m = random_model(rng, 3, 3, 1).with_(observation=np.eye(3)[None], initial_observation=np.eye(3))
    z = rng.dirichlet(np.ones(3))
    q = belief_transition(m, z, 0)
    pred = predictive(m, z, 0)
    for s, w, ys in zip(q.support, q.weights, q.observations):
        assert s.max() == 1.0
        assert w == pytest.approx(pred[ys[0]], abs=1e-15)
    q0 = initial_belief(m)
    np.testing.assert_allclose(sorted(q0.weights), sorted(m.prior), atol=1e-15)


def test_uninformative_initial_observation_is_point_mass_at_prior():
    m = static_model([[[0.5, 0.5], [0.5, 0.5]]])
    q0 = initial_belief(m, [0.25, 0.75])
    assert len(q0) == 1
    np.testing.assert_allclose(q0.support[0], [0.25, 0.75])


def test_initial_belief_matches_pair_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = random_model(rng, 3, 3, 1, sparsity=0.3)
        q0 = initial_belief(m)
        for y in range(3):
            joint = m.prior * m.initial_observation[:, y]
            if joint.sum() == 0:
                continue
            post = joint / joint.sum()
            hits = [i for i, ys in enumerate(q0.observations) if y in ys]
            np.testing.assert_allclose(q0.support[hits[0]], post, atol=1e-12)
        assert q0.weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_merging_collapses_identical_posteriors():
    # two observations carrying the same likelihood ratio give one atom
    m = static_model([[[0.2, 0.2, 0.6], [0.1, 0.1, 0.8]]])
    q = belief_transition(m, [0.5, 0.5], 0)
    assert len(q) == 2
    assert q.observations[0] == (0, 1)
    assert q.weights[0] == pytest.approx(0.3)


def test_filter_history_matches_enumeration():
    rng = np.random.default_rng(4)
    m = random_model(rng, 3, 2, 2)
    steps = [(0, 1), (1, 0), (1, 1)]
    beliefs = filter_history(m, 0, steps)
    for t in range(len(steps) + 1):
        post, _ = enumerate_posterior(m, 0, steps[:t])
        np.testing.assert_allclose(beliefs[t], post, atol=1e-12)


def test_infeasible_action_is_flagged_not_refused():
    m = static_model([[[0.5, 0.5], [0.5, 0.5]]] * 2, cost=[[0.0, np.inf], [0.0, np.inf]])
    assert is_infeasible(m, [0.5, 0.5], 1)
    assert not is_infeasible(m, [0.5, 0.5], 0)
    assert obs_marginal(m, [0.5, 0.5], 1).sum() == pytest.approx(1.0)


def test_belief_distribution_validation():
    with pytest.raises(ValueError):
        BeliefDistribution([[0.5, 0.5]], [0.9])
    with pytest.raises(ValueError):
        BeliefDistribution([[0.5, 0.6]], [1.0])
    d = BeliefDistribution([[1, 0], [0, 1]], [0.25, 0.75])
    assert d.mass(lambda z: z[1] > 0.5) == 0.75
    assert d.expectation(lambda Z: Z[:, 0]) == 0.25


def test_rejects_wrong_belief_dimension():
    m = static_model([[[1.0], [1.0]]])
    with pytest.raises(ValueError):
        bayes_update(m, [1.0, 0.0, 0.0], 0, 0)


def test_random_stochastic_helper_rows_sum_to_one():
    rng = np.random.default_rng(5)
    m = random_stochastic(rng, (4, 3, 5), sparsity=0.7)
    np.testing.assert_allclose(m.sum(axis=-1), 1.0)
