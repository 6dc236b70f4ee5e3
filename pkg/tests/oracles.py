"""Random models and brute-force reference computations shared by the tests."""

import itertools

import numpy as np

from comdp.model import DiscretePomdp


def random_stochastic(rng, shape, sparsity=0.0):
    """Random row-stochastic array; ``sparsity`` zeroes entries (keeping one per row)."""
    m = rng.random(shape)
    if sparsity:
        m = np.where(rng.random(shape) < sparsity, 0.0, m)
        flat = m.reshape(-1, shape[-1])
        empty = flat.sum(axis=1) == 0
        flat[empty, rng.integers(shape[-1], size=int(empty.sum()))] = 1.0
    return m / m.sum(axis=-1, keepdims=True)


def random_model(rng, nx=2, ny=2, na=2, discount=0.9, mode="P", sparsity=0.0,
                 cost_range=(0.0, 1.0)) -> DiscretePomdp:
    lo, hi = cost_range
    return DiscretePomdp(
        states=[f"s{i}" for i in range(nx)],
        observations=[f"o{i}" for i in range(ny)],
        actions=[f"a{i}" for i in range(na)],
        transition=random_stochastic(rng, (na, nx, nx), sparsity),
        observation=random_stochastic(rng, (na, nx, ny), sparsity),
        initial_observation=random_stochastic(rng, (nx, ny), sparsity),
        prior=random_stochastic(rng, (nx,)),
        cost=lo + (hi - lo) * rng.random((nx, na)),
        discount=discount,
        cost_mode=mode,
    )


def random_belief(rng, n, size=None):
    return rng.dirichlet(np.ones(n), size=size)


def enumerate_posterior(model, y0, steps, prior=None):
    """Conditional law of the last hidden state given the history, by summing
    over every hidden path; returns (posterior, probability of the history)."""
    p = model.prior if prior is None else np.asarray(prior)
    nx = model.n_states
    T = len(steps)
    post = np.zeros(nx)
    for path in itertools.product(range(nx), repeat=T + 1):
        w = p[path[0]] * model.initial_observation[path[0], y0]
        for t, (a, y) in enumerate(steps):
            w *= model.transition[a, path[t], path[t + 1]] * model.observation[a, path[t + 1], y]
        post[path[-1]] += w
    total = post.sum()
    return (post / total if total > 0 else post), total


def two_step_strategy_value(model, z):
    """min over a0 and every map y1 -> a1 of the expected two-step discounted cost."""
    nx, ny, na = model.n_states, model.n_observations, model.n_actions
    z = np.asarray(z, dtype=float)
    best = np.inf
    for a0 in range(na):
        first = float(z @ model.cost[:, a0])
        # weight of (x1, y1) given z and a0
        w = (z @ model.transition[a0])[:, None] * model.observation[a0]
        for rule in itertools.product(range(na), repeat=ny):
            second = sum(w[x1, y] * model.cost[x1, rule[y]] for x1 in range(nx) for y in range(ny))
            best = min(best, first + model.discount * second)
    return best


def exact_policy_cost(model, policy, horizon):
    """Expected discounted cost of a belief policy over ``horizon`` steps by
    enumerating every state/observation trajectory."""
    from comdp.filtering import bayes_update, initial_update

    def rec(x, z, t, prob, disc):
        if t == horizon or prob == 0:
            return 0.0
        a = policy(z)
        total = prob * disc * model.cost[x, a]
        for x2 in range(model.n_states):
            px = model.transition[a, x, x2]
            if px == 0:
                continue
            for y in range(model.n_observations):
                py = model.observation[a, x2, y]
                if py == 0:
                    continue
                total += rec(x2, bayes_update(model, z, a, y), t + 1, prob * px * py, disc * model.discount)
        return total

    out = 0.0
    for x in range(model.n_states):
        for y in range(model.n_observations):
            w = model.prior[x] * model.initial_observation[x, y]
            if w > 0:
                out += rec(x, initial_update(model, model.prior, y), 0, w, 1.0)
    return out
