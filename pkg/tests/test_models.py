import math

import numpy as np
import pytest

from comdp.filtering import bayes_update, belief_transition, obs_marginal_measure, predictive
from comdp.measures import tv_distance
from comdp.model import ModelError, validate
from comdp.models import (BUILDERS, InventorySpec, KalmanSpec, build, build_dyadic_density, build_inventory,
                          build_kalman, build_mdmii_dyadic, build_oscillating_channel, build_sign_switch,
                          hidden_label_marginal, kalman_exact)


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_every_builder_validates(name):
    params = {"n": 3} if name in ("dyadic_density", "mdmii_dyadic") else {}
    if name == "sign_switch":
        params = {"k_max": 10}
    assert validate(build(name, params)).ok


def test_build_rejects_unknown_parameters():
    with pytest.raises(TypeError):
        build("dyadic_density", {"bogus": 1})
    with pytest.raises(KeyError):
        build("nope")


def test_dyadic_density_cell_masses():
    m = build_dyadic_density(1, 2)
    np.testing.assert_array_equal(m.observation[1, 1], [0.0, 1.0])
    for n in (2, 4):
        m = build_dyadic_density(n, 2 ** (n + 2))
        np.testing.assert_allclose(m.observation[:, 0], 1.0 / 2 ** (n + 2))
        with pytest.raises(ValueError):
            build_dyadic_density(n, 2 ** n + 2)


@pytest.mark.parametrize("n", [1, 4, 6])
def test_dyadic_tv_gap_is_half(n):
    m = build_dyadic_density(n, 2 ** (n + 1))
    for j in range(1, n + 1):
        p, q = obs_marginal_measure(m, [0, 1], j), obs_marginal_measure(m, [0, 1], 0)
        assert tv_distance(p, q) == pytest.approx(0.5, abs=1e-12)


def test_sign_switch_branches():
    m = build_sign_switch(2)
    a = dict(zip(m.action_coords[:, 0], range(m.n_actions)))
    assert m.observation[a[-0.5], 0, 1] == pytest.approx(0.5)  # 1 - |a|
    assert m.observation[a[0.0], :, 0].tolist() == [0.0, 0.0]
    assert m.observation[a[0.5], 1, 0] == pytest.approx(0.5)
    assert m.actions[0] == "-1" and "1/2" in m.actions


def test_oscillating_channel_truncation_defect():
    K = 5
    m = build_oscillating_channel(3, K)
    sink = m.observation_index("sink")
    for a in range(1, 4):
        for x in range(2):
            row = m.observation[a, x]
            assert row[sink] == 2.0 ** -(K + 1)
    # the two states share each block mass, so their sum before the sink is 2 (1 - 2^-(K+1))
    for a in range(1, 4):
        assert m.observation[a, :, :sink].sum() == pytest.approx(2 * (1 - 2.0 ** -(K + 1)), abs=1e-14)
    assert m.observation[0, :, 0].tolist() == [1.0, 1.0]
    assert m.metadata["truncation_defect"] == 2.0 ** -(K + 1)


def test_mdmii_posteriors():
    n = 3
    m = build_mdmii_dyadic(n)
    cells = m.metadata["cells"]
    z = np.full(m.n_states, 1.0 / m.n_states)
    for cell in range(cells):
        w = hidden_label_marginal(m, bayes_update(m, z, n, cell))
        np.testing.assert_allclose(w, [1 / 3, 2 / 3] if cell % 2 else [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(hidden_label_marginal(m, bayes_update(m, z, 0, cell)), [0.5, 0.5], atol=1e-12)
    q = belief_transition(m, z, n)
    in_d = lambda b: np.allclose(hidden_label_marginal(m, b), [1 / 3, 2 / 3], atol=1e-12)
    assert q.mass(in_d) == pytest.approx(0.75, abs=1e-12)
    assert belief_transition(m, z, 0).mass(in_d) == 0.0


def test_inventory_transparent_containers_give_point_masses():
    spec = InventorySpec(cuts=(-0.5,), transparent=(True, True))
    m = build_inventory(spec)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.dirichlet(np.ones(m.n_states))
        q = belief_transition(m, z, int(rng.integers(m.n_actions)))
        assert np.all(q.support.max(axis=1) == 1.0)


def test_inventory_opaque_container_posterior_is_restricted_predictive():
    spec = InventorySpec(cuts=(0.5,), transparent=(True, False))
    m = build_inventory(spec)
    b = m.observation_index("B1")
    z = np.zeros(m.n_states)
    z[m.states.index("2")] = 1.0
    post = bayes_update(m, z, 1, b)
    pred = predictive(m, z, 1)
    mask = spec.levels > 0.5
    np.testing.assert_allclose(post, np.where(mask, pred, 0) / pred[mask].sum(), atol=1e-15)
    assert m.observation_coords[b, 0] == pytest.approx(1.5)  # cut + 1 for an unbounded container


def test_inventory_lost_sales_zero_level_probability():
    spec = InventorySpec(level_min=0.0, cuts=(2.5,), transparent=(True, False), mode="lost-sales")
    m = build_inventory(spec)
    d = np.array(spec.demand_values)
    p = np.array(spec.demand_probs)
    zero = m.states.index("0")
    for ai, a in enumerate(spec.actions):
        for xi, x in enumerate(spec.levels):
            assert m.transition[ai, xi, zero] == pytest.approx(p[d >= x + a].sum(), abs=1e-15)


def test_inventory_costs():
    spec = InventorySpec(actions=(0.0, 1.0, 4.0), max_order=3.0)
    m = build_inventory(spec)
    x = m.states.index("-2")
    assert m.cost[x, 0] == pytest.approx(2 * spec.backorder)
    assert m.cost[x, 1] == pytest.approx(2 * spec.backorder + spec.fixed_order + spec.unit_order)
    assert m.cost[x, 2] == math.inf


def test_inventory_spec_rejections():
    with pytest.raises(ModelError, match="boundar"):
        build_inventory(InventorySpec(cuts=(0.0,)))
    with pytest.raises(ModelError, match="smaller"):
        build_inventory(InventorySpec(cuts=(-0.5, 0.5, 1.5), transparent=(True,) * 4, min_container_size=2.0))
    with pytest.raises(ModelError, match="transparency"):
        build_inventory(InventorySpec(transparent=(True,)))
    with pytest.raises(ModelError, match="multiples"):
        build_inventory(InventorySpec(demand_values=(0.0, 0.5, 2.0, 3.0)))


def test_kalman_rows_and_rejections():
    kg = build_kalman(KalmanSpec(state_step=0.25, b=0.0))
    np.testing.assert_allclose(kg.model.observation.sum(axis=-1), 1.0, atol=1e-12)
    assert validate(kg.model).ok
    with pytest.raises(ModelError):
        build_kalman(KalmanSpec(c=0.0))
    with pytest.raises(ModelError):
        build_kalman(KalmanSpec(state_halfwidth=2.0))
    xs = kg.spec.state_grid
    np.testing.assert_allclose(xs, -xs[::-1])


def test_kalman_exact_one_step():
    s2, c = 2.0, 0.7
    spec = KalmanSpec(d=1.0, b=0.0, h=1.0, c=c)
    m, v = kalman_exact(spec, 0.0, s2, [], [1.3])
    assert m[0] == pytest.approx(1.3 * s2 / (s2 + c * c))
    m, v = kalman_exact(KalmanSpec(c=1e3), 0.4, 1.0, [], [5.0])
    assert m[0] == pytest.approx(0.4, abs=1e-5)
    with pytest.raises(ValueError):
        kalman_exact(spec, 0.0, 1.0, [0.0], [1.0])


def test_kalman_grid_filter_tracks_exact_mean():
    from comdp.filtering import filter_history
    kg = build_kalman(KalmanSpec(state_step=0.1))
    rng = np.random.default_rng(0)
    for _ in range(10):
        _, ys = kg.sample(rng, [0.0] * 5)
        cells = [kg.observation_cell(y) for y in ys]
        bel = filter_history(kg.model, cells[0], [(0, c) for c in cells[1:]])
        exact, _ = kg.exact(0.0, 1.0, [0.0] * 5, ys)
        assert max(abs(kg.mean(b) - e) for b, e in zip(bel, exact)) <= 2 * 0.1
