"""Bayes filter kernels of the belief-state reduction.

For a belief ``z`` and action ``a``:

* ``joint_update``     R(x', y | z, a) = sum_x z(x) P(x'|x,a) Q(y|a,x')
* ``obs_marginal``     R'(y | z, a) = sum_x' R(x', y | z, a)
* ``bayes_update``     H(z, a, y) = R(., y | z, a) / R'(y | z, a)
* ``belief_transition`` q(. | z, a), the law of the next belief
* ``initial_belief``   q0(. | p), the law of the first belief

When ``R'(y | z, a) = 0`` the posterior is defined as ``z`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import FiniteMeasure, MetricSupport, cluster_points
from .model import BELIEF_TOL, DiscretePomdp, as_belief

MERGE_TOL = 1e-12
_BELIEF_METRIC = MetricSupport("euclidean-nd")


@dataclass(frozen=True)
class BeliefDistribution:
    """Finitely supported law over beliefs; ``support[i]`` has weight ``weights[i]``.

    ``observations[i]`` lists the observation indices that produced
    ``support[i]`` (empty when built directly).
    """

    support: np.ndarray
    weights: np.ndarray
    observations: tuple = ()

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.support, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(s) != len(w):
            raise ValueError("support and weights differ in length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > BELIEF_TOL * max(1, len(w)):
            raise ValueError(f"weights must be a probability vector (sum {w.sum()!r})")
        if np.any(s < 0) or np.any(np.abs(s.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("support elements must be beliefs")
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    def mass(self, predicate) -> float:
        """Total weight of the beliefs for which ``predicate(belief)`` holds."""
        return float(sum(w for z, w in zip(self.support, self.weights) if predicate(z)))

    def as_measure(self) -> FiniteMeasure:
        return FiniteMeasure(self.support, self.weights, _BELIEF_METRIC)

    def expectation(self, fn) -> float:
        vals = np.asarray(fn(self.support), dtype=float)
        pos = self.weights > 0
        return float(np.dot(self.weights[pos], vals[pos]))


def _check(model: DiscretePomdp, z, a) -> tuple[np.ndarray, int]:
    z = as_belief(z, model.n_states)
    a = model.action_index(a)
    return z, a


def predictive(model: DiscretePomdp, z, a) -> np.ndarray:
    """Distribution of the next state, sum_x z(x) P(.|x,a)."""
    z, a = _check(model, z, a)
    return z @ model.transition[a]


def joint_update(model: DiscretePomdp, z, a) -> np.ndarray:
    """Joint law of (next state, next observation) as an |X| x |Y| table."""
    z, a = _check(model, z, a)
    pred = z @ model.transition[a]
    return pred[:, None] * model.observation[a]


def is_infeasible(model: DiscretePomdp, z, a) -> bool:
    """True when ``a`` has infinite cost at every state charged by ``z``."""
    z, a = _check(model, z, a)
    return bool(np.all(np.isinf(model.cost[z > 0, a])))


def obs_marginal(model: DiscretePomdp, z, a) -> np.ndarray:
    """R'(. | z, a) as a vector over observation indices."""
    return joint_update(model, z, a).sum(axis=0)


def obs_marginal_measure(model: DiscretePomdp, z, a) -> FiniteMeasure:
    """R'(. | z, a) placed on the observation coordinates."""
    w = obs_marginal(model, z, a)
    w = w / w.sum()
    coords = model.observation_coords
    support = MetricSupport("euclidean-1d" if coords.shape[1] == 1 else "euclidean-nd")
    return FiniteMeasure(coords, w, support)


def _posteriors(joint: np.ndarray, prior: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior rows for every observation plus the observation marginal."""
    marg = joint.sum(axis=0)
    post = np.empty((joint.shape[1], joint.shape[0]))
    pos = marg > 0
    post[pos] = (joint[:, pos] / marg[pos]).T
    post[~pos] = prior
    return post, marg


def bayes_update(model: DiscretePomdp, z, a, y) -> np.ndarray:
    """Posterior belief after taking ``a`` and observing ``y``."""
    z, a = _check(model, z, a)
    y = model.observation_index(y)
    pred = z @ model.transition[a]
    col = pred * model.observation[a][:, y]
    total = col.sum()
    if total <= 0:
        return z.copy()
    return col / total


def bayes_update_all(model: DiscretePomdp, z, a) -> tuple[np.ndarray, np.ndarray]:
    """All posteriors at once: ``(posteriors[y], R'(y))``."""
    z, a = _check(model, z, a)
    return _posteriors(joint_update(model, z, a), z)


def merge_posteriors(post: np.ndarray, marg: np.ndarray) -> BeliefDistribution:
    """Collapse observations with equal posteriors (componentwise 1e-12),
    keeping observation order for ties."""
    pos = np.nonzero(marg > 0)[0]
    pts = post[pos]
    labels = cluster_points(pts, _BELIEF_METRIC, MERGE_TOL)
    n = int(labels.max()) + 1
    weights = np.zeros(n)
    np.add.at(weights, labels, marg[pos])
    _, first = np.unique(labels, return_index=True)
    obs = tuple(tuple(int(y) for y in pos[labels == g]) for g in range(n))
    return BeliefDistribution(pts[first], weights / weights.sum(), obs)


def belief_transition(model: DiscretePomdp, z, a) -> BeliefDistribution:
    """Law of the next belief given belief ``z`` and action ``a``."""
    post, marg = bayes_update_all(model, z, a)
    return merge_posteriors(post, marg)


def initial_belief(model: DiscretePomdp, prior=None) -> BeliefDistribution:
    """Law of the first belief: condition the prior on the initial observation."""
    p = as_belief(model.prior if prior is None else prior, model.n_states)
    joint = p[:, None] * model.initial_observation
    post, marg = _posteriors(joint, p)
    return merge_posteriors(post, marg)


def initial_update(model: DiscretePomdp, prior, y) -> np.ndarray:
    """First belief after observing ``y`` at time 0."""
    p = as_belief(prior, model.n_states)
    y = model.observation_index(y)
    col = p * model.initial_observation[:, y]
    total = col.sum()
    return p.copy() if total <= 0 else col / total


def filter_history(model: DiscretePomdp, y0, steps, prior=None) -> list[np.ndarray]:
    """Beliefs along an observed history ``y0, (a0, y1), (a1, y2), ...``."""
    z = initial_update(model, model.prior if prior is None else prior, y0)
    out = [z]
    for a, y in steps:
        z = bayes_update(model, z, a, y)
        out.append(z)
    return out
