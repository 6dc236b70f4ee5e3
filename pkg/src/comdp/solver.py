"""Dynamic programming on the belief-state MDP.

Two value-function representations are provided:

* ``AlphaVectorSet``: exact finite-horizon values ``min_k <alpha_k, z>``
  built by ``alpha_backup``;
* ``BeliefGridValues``: values on the simplex lattice with denominators ``r``,
  interpolated barycentrically over the Freudenthal triangulation, produced
  by ``value_iterate_grid``.

Infinite costs follow the convention ``0 * inf = 0``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .filtering import bayes_update, bayes_update_all, initial_belief, initial_update
from .model import DiscretePomdp, as_belief

log = logging.getLogger(__name__)

BELLMAN_TOL = 1e-9
DEFAULT_EPSILON = 1e-8
OVERFLOW = 1e15


def _inf_dot(vectors: np.ndarray, beliefs: np.ndarray) -> np.ndarray:
    """``beliefs @ vectors.T`` with ``0 * inf = 0``; shapes (m, n), (k, n) -> (k, m)."""
    vectors = np.atleast_2d(vectors)
    beliefs = np.atleast_2d(beliefs)
    if np.all(np.isfinite(vectors)):
        return beliefs @ vectors.T
    out = np.empty((len(beliefs), len(vectors)))
    for i, z in enumerate(beliefs):
        pos = z > 0
        out[i] = vectors[:, pos] @ z[pos]
    return out


def _scale(alpha: float, v: np.ndarray) -> np.ndarray:
    if alpha == 0.0:
        return np.zeros_like(v)
    return alpha * v


class ValueFunction(Protocol):
    n_states: int

    def values(self, beliefs: np.ndarray) -> np.ndarray: ...


def value_at(V: ValueFunction, z) -> float:
    return float(V.values(np.atleast_2d(np.asarray(z, dtype=float)))[0])


# -- one-step quantities ----------------------------------------------------

def lift_cost(model: DiscretePomdp, z, a) -> float:
    """Expected one-step cost ``sum_x z(x) c(x, a)``."""
    z = as_belief(z, model.n_states)
    a = model.action_index(a)
    c = model.cost[:, a]
    pos = z > 0
    return float(c[pos] @ z[pos])


def lifted_costs(model: DiscretePomdp, z) -> np.ndarray:
    return _inf_dot(model.cost.T, as_belief(z, model.n_states))[0]


def q_values(model: DiscretePomdp, V: ValueFunction, z) -> np.ndarray:
    """Bellman right-hand side for every action at belief ``z``."""
    z = as_belief(z, model.n_states)
    out = lifted_costs(model, z)
    if model.discount == 0.0:
        return out
    for a in range(model.n_actions):
        post, marg = bayes_update_all(model, z, a)
        pos = marg > 0
        vals = V.values(post[pos])
        cont = float(marg[pos] @ vals) if np.all(np.isfinite(vals)) else math.inf
        out[a] = out[a] + model.discount * cont
    return out


def bellman_value(model: DiscretePomdp, V: ValueFunction, z) -> float:
    return float(q_values(model, V, z).min())


def greedy_action_set(model: DiscretePomdp, V: ValueFunction, z, tolerance: float = BELLMAN_TOL) -> list[int]:
    """Actions attaining the Bellman minimum at ``z`` within ``tolerance``.

    If the minimum is infinite every action is returned.
    """
    q = q_values(model, V, z)
    best = q.min()
    if not np.isfinite(best) or not np.isfinite(value_at(V, z)):
        return list(range(model.n_actions))
    return [int(a) for a in np.nonzero(q <= best + tolerance)[0]]


def optimality_residual(model: DiscretePomdp, V: ValueFunction, beliefs) -> float:
    """``max_z |V(z) - (T V)(z)|`` over the sample beliefs (T: Bellman operator)."""
    beliefs = np.atleast_2d(np.asarray(beliefs, dtype=float))
    worst = 0.0
    for z in beliefs:
        v = value_at(V, z)
        tv = bellman_value(model, V, z)
        if math.isinf(v) and math.isinf(tv):
            continue
        worst = max(worst, abs(v - tv))
    return worst


# -- exact finite horizon ---------------------------------------------------

@dataclass
class AlphaVectorSet:
    """``V(z) = min_k <vectors[k], z>``; ``actions[k]`` achieved vector ``k``."""

    vectors: np.ndarray
    actions: np.ndarray
    horizon: int = 0

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        self.actions = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        if len(self.vectors) == 0:
            raise ValueError("an alpha-vector set cannot be empty")
        if len(self.actions) != len(self.vectors):
            raise ValueError("one action tag per vector")

    @classmethod
    def zero(cls, n_states: int) -> "AlphaVectorSet":
        return cls(np.zeros((1, n_states)), np.array([-1]), 0)

    @property
    def n_states(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vectors)

    def values(self, beliefs) -> np.ndarray:
        return _inf_dot(self.vectors, beliefs).min(axis=1)

    def __call__(self, z) -> float:
        return value_at(self, z)

    def best_action(self, z) -> int:
        dots = _inf_dot(self.vectors, np.asarray(z, dtype=float))[0]
        return int(self.actions[int(np.argmin(dots))])


def prune_pointwise(vectors: np.ndarray) -> np.ndarray:
    """Indices of vectors not pointwise dominated (``u <= v``) by another.

    Exact duplicates keep their first occurrence.
    """
    k = len(vectors)
    if k <= 1:
        return np.arange(k)
    le = np.all(vectors[:, None, :] <= vectors[None, :, :], axis=2)  # le[i, j]: i <= j
    eq = le & le.T
    earlier = np.tril(np.ones((k, k), dtype=bool), -1)  # earlier[j, i]: i < j
    dominated = ((le & ~eq) | (eq & earlier.T)).any(axis=0)
    return np.nonzero(~dominated)[0]


def prune_lp(vectors: np.ndarray) -> np.ndarray:
    """Indices of vectors that are strictly best at some belief (LP filter)."""
    keep = list(prune_pointwise(vectors))
    n = vectors.shape[1]
    if not np.all(np.isfinite(vectors[keep])):
        return np.asarray(keep)
    out = []
    for i in keep:
        others = [j for j in keep if j != i]
        if not others:
            out.append(i)
            continue
        # maximize d s.t. <v_i, z> + d <= <v_j, z>, z in simplex
        c = np.zeros(n + 1)
        c[-1] = -1.0
        a_ub = np.hstack([vectors[i] - vectors[others], np.ones((len(others), 1))])
        a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(others)), A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0, None)] * n + [(None, None)], method="highs")
        if res.status == 0 and -res.fun > 1e-12:
            out.append(i)
    return np.asarray(out if out else keep[:1])


def _projections(model: DiscretePomdp, V: AlphaVectorSet, a: int) -> list[np.ndarray]:
    """For each observation y: rows ``sum_x' P(x'|x,a) Q(y|a,x') g(x')`` over g in V."""
    P = model.transition[a]
    out = []
    for y in range(model.n_observations):
        W = P * model.observation[a][:, y][None, :]  # W[x, x']
        out.append(_inf_dot(V.vectors, W).T)  # (|V|, |X|)
    return out


def _backup_action(model: DiscretePomdp, V: AlphaVectorSet, a: int, use_lp: bool) -> np.ndarray:
    prune = prune_lp if use_lp else prune_pointwise
    cands = model.cost[:, a][None, :].copy()
    if model.discount != 0.0:
        for proj in _projections(model, V, a):
            proj = _scale(model.discount, proj)
            cands = (cands[:, None, :] + proj[None, :, :]).reshape(-1, model.n_states)
            cands = cands[prune(cands)]
    return cands


def alpha_backup(model: DiscretePomdp, V: AlphaVectorSet, *, lp_prune: bool = False,
                 threads: int = 1) -> AlphaVectorSet:
    """One exact Bellman backup of an alpha-vector set."""
    if V.n_states != model.n_states:
        raise ValueError("value function does not match the model's states")
    work = lambda a: _backup_action(model, V, a, lp_prune)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_action = list(pool.map(work, range(model.n_actions)))
    else:
        per_action = [work(a) for a in range(model.n_actions)]
    vectors = np.vstack(per_action)
    tags = np.concatenate([np.full(len(v), a) for a, v in enumerate(per_action)])
    keep = (prune_lp if lp_prune else prune_pointwise)(vectors)
    return AlphaVectorSet(vectors[keep], tags[keep], V.horizon + 1)


def solve_finite_horizon(model: DiscretePomdp, horizon: int, **kw) -> list[AlphaVectorSet]:
    """``[V_0, ..., V_T]`` by repeated exact backups from ``V_0 = 0``."""
    sets = [AlphaVectorSet.zero(model.n_states)]
    for _ in range(horizon):
        sets.append(alpha_backup(model, sets[-1], **kw))
    return sets


# -- simplex grid -----------------------------------------------------------

def simplex_lattice(n: int, r: int) -> np.ndarray:
    """All integer vectors of length ``n`` with entries >= 0 summing to ``r``."""
    if n == 1:
        return np.array([[r]], dtype=np.int64)
    rows = []
    for first in range(r, -1, -1):
        rest = simplex_lattice(n - 1, r - first)
        rows.append(np.hstack([np.full((len(rest), 1), first), rest]))
    return np.vstack(rows)


class BeliefGridValues:
    """Values on the lattice ``{k / r : k integer, sum k = r}``.

    Off-lattice beliefs are interpolated over the Freudenthal (Kuhn)
    triangulation: the interpolation weights are nonnegative, sum to 1 and
    reproduce lattice points exactly.
    """

    def __init__(self, n_states: int, resolution: int, values=None):
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        self.n_states = n_states
        self.resolution = resolution
        self.lattice = simplex_lattice(n_states, resolution)
        self.vertices = self.lattice / resolution
        self._base = resolution + 1
        keys = self._keys(self.lattice)
        self._order = np.argsort(keys)
        self._sorted_keys = keys[self._order]
        self.values_ = np.zeros(len(self.lattice)) if values is None else np.asarray(values, float)

    def __len__(self):
        return len(self.lattice)

    def _keys(self, lattice: np.ndarray) -> np.ndarray:
        # the last coordinate is implied by the others
        keys = np.zeros(len(lattice), dtype=np.int64)
        for j in range(lattice.shape[1] - 1):
            keys = keys * self._base + lattice[:, j]
        return keys

    def index_of(self, lattice_points: np.ndarray) -> np.ndarray:
        keys = self._keys(np.atleast_2d(lattice_points))
        pos = np.minimum(np.searchsorted(self._sorted_keys, keys), len(self._sorted_keys) - 1)
        if np.any(self._sorted_keys[pos] != keys):
            raise ValueError("point is not on the lattice")
        return self._order[pos]

    def interpolation(self, beliefs) -> tuple[np.ndarray, np.ndarray]:
        """Vertex indices and weights, each of shape (k, n_states)."""
        Z = np.atleast_2d(np.asarray(beliefs, dtype=float))
        k, n = Z.shape
        if n != self.n_states:
            raise ValueError("belief dimension does not match the grid")
        r = self.resolution
        if n == 1:
            return np.zeros((k, 1), dtype=np.int64), np.ones((k, 1))
        # cumulative coordinates w_j = r * sum_{i >= j} z_i, j = 1..n-1
        tail = np.cumsum(Z[:, ::-1], axis=1)[:, ::-1][:, 1:] * r
        snapped = np.rint(tail)
        tail = np.where(np.abs(tail - snapped) < 1e-9, snapped, tail)
        tail = np.clip(tail, 0, r)
        base = np.floor(tail)
        frac = tail - base
        order = np.argsort(-frac, axis=1, kind="stable")
        d_sorted = np.take_along_axis(frac, order, axis=1)
        weights = np.empty((k, n))
        weights[:, 0] = 1.0 - d_sorted[:, 0]
        weights[:, 1:-1] = d_sorted[:, :-1] - d_sorted[:, 1:]
        weights[:, -1] = d_sorted[:, -1]
        idx = np.empty((k, n), dtype=np.int64)
        w_cur = base.astype(np.int64)
        rows = np.arange(k)
        for step in range(n):
            if step > 0:
                w_cur = w_cur.copy()
                w_cur[rows, order[:, step - 1]] += 1
            lat = self._from_cumulative(w_cur)
            ok = weights[:, step] > 0
            idx[:, step] = 0
            if ok.any():
                idx[ok, step] = self.index_of(lat[ok])
        weights[weights < 0] = 0.0
        return idx, weights

    def _from_cumulative(self, w: np.ndarray) -> np.ndarray:
        r = self.resolution
        full = np.hstack([np.full((len(w), 1), r), w, np.zeros((len(w), 1), dtype=np.int64)])
        return full[:, :-1] - full[:, 1:]

    def values(self, beliefs) -> np.ndarray:
        idx, w = self.interpolation(beliefs)
        vals = self.values_[idx]
        vals = np.where(w > 0, vals, 0.0)
        return (w * vals).sum(axis=1)

    def __call__(self, z) -> float:
        return value_at(self, z)


@dataclass
class GridSolution:
    values: BeliefGridValues
    trace: list = field(default_factory=list)  # sup-norm change per iteration
    iterations: int = 0
    converged: bool = False
    history: list | None = None  # vertex values per iteration, when recorded


def grid_operator(model: DiscretePomdp, grid: BeliefGridValues) -> tuple[np.ndarray, list]:
    """Lifted costs at the vertices (|V| x |A|) and per-action sparse
    successor matrices ``T_a[v, v'] = sum_y R'(y|v,a) * weight of v' in H(v,a,y)``."""
    verts = grid.vertices
    costs = _inf_dot(model.cost.T, verts)
    mats = []
    nv = len(verts)
    for a in range(model.n_actions):
        pred = verts @ model.transition[a]  # (nv, X)
        joint = pred[:, :, None] * model.observation[a][None, :, :]  # (nv, X, Y)
        marg = joint.sum(axis=1)  # (nv, Y)
        vv, yy = np.nonzero(marg > 0)
        post = joint[vv, :, yy] / marg[vv, yy][:, None]
        idx, w = grid.interpolation(post)
        data = (marg[vv, yy][:, None] * w).ravel()
        rows = np.repeat(vv, grid.n_states)
        keep = data > 0
        T = sparse.csr_matrix((data[keep], (rows[keep], idx.ravel()[keep])), shape=(nv, nv))
        T.sum_duplicates()
        T.sort_indices()
        mats.append(T)
    return costs, mats


def _sweep_rows(costs, mats, alpha, V, lo, hi):
    out = np.empty((hi - lo, len(mats)))
    finite_v = np.isfinite(V)
    for a, T in enumerate(mats):
        block = T[lo:hi]
        if alpha == 0.0:
            out[:, a] = costs[lo:hi, a]
            continue
        if finite_v.all():
            cont = block @ V
        else:
            # a successor with infinite value makes the continuation infinite
            cont = block @ np.where(finite_v, V, 0.0)
            hits = block @ (~finite_v).astype(float)
            cont = np.where(hits > 0, math.inf, cont)
        out[:, a] = costs[lo:hi, a] + alpha * cont
    return out.min(axis=1)


def value_iterate_grid(model: DiscretePomdp, resolution: int, max_iters: int = 1000,
                       tolerance: float = DEFAULT_EPSILON, *, threads: int = 1,
                       initial=None, record_history: bool = False) -> GridSolution:
    """Bellman iteration restricted to the grid vertices, starting from 0.

    Stops when the sup-norm change is ``<= tolerance`` or after ``max_iters``
    sweeps. Values above 1e15 are reported as ``+inf``.
    """
    grid = BeliefGridValues(model.n_states, resolution)
    costs, mats = grid_operator(model, grid)
    V = np.zeros(len(grid)) if initial is None else np.asarray(initial, dtype=float).copy()
    nv = len(grid)
    threads = max(1, int(threads))
    bounds = np.linspace(0, nv, threads + 1).astype(int)
    sol = GridSolution(grid, history=[V.copy()] if record_history else None)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for it in range(1, max_iters + 1):
            if pool is None:
                new = _sweep_rows(costs, mats, model.discount, V, 0, nv)
            else:
                parts = pool.map(lambda b: _sweep_rows(costs, mats, model.discount, V, b[0], b[1]),
                                 zip(bounds[:-1], bounds[1:]))
                new = np.concatenate(list(parts))
            new[new > OVERFLOW] = math.inf
            both = np.isfinite(new) & np.isfinite(V)
            changed_inf = np.isfinite(new) != np.isfinite(V)
            delta = float(np.max(np.abs(new[both] - V[both]), initial=0.0))
            if changed_inf.any():
                log.debug("iteration %d: %d vertices became infinite", it, int(changed_inf.sum()))
            V = new
            sol.trace.append(delta)
            sol.iterations = it
            if record_history:
                sol.history.append(V.copy())
            if delta <= tolerance and not changed_inf.any():
                sol.converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    grid.values_ = V
    return sol


# -- policies and simulation ------------------------------------------------

class GreedyPolicy:
    """Stationary policy on beliefs, greedy with respect to ``V``.

    Ties go to the lowest action index.
    """

    def __init__(self, model: DiscretePomdp, V: ValueFunction, tolerance: float = BELLMAN_TOL):
        self.model = model
        self.V = V
        self.tolerance = tolerance

    def __call__(self, z) -> int:
        return greedy_action_set(self.model, self.V, z, self.tolerance)[0]


@dataclass
class SimulationResult:
    mean: float
    stderr: float
    episodes: int
    horizon: int
    costs: np.ndarray
    aborted: int = 0
    diagnostics: list = field(default_factory=list)


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    c = np.cumsum(probs)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, len(probs) - 1)


def simulate_policy(model: DiscretePomdp, policy: Callable, prior=None, horizon: int = 1,
                    episodes: int = 1, seed: int = 0) -> SimulationResult:
    """Monte Carlo estimate of the expected discounted ``horizon``-step cost
    of running ``policy`` (belief -> action index) through the filter.

    An episode whose policy picks an infinite-cost action is aborted; its
    cost is ``+inf`` and a diagnostic is recorded.
    """
    if horizon < 1 or episodes < 1:
        raise ValueError("horizon and episodes must be >= 1")
    p = as_belief(model.prior if prior is None else prior, model.n_states)
    rng = np.random.default_rng(seed)
    costs = np.zeros(episodes)
    diags = []
    for ep in range(episodes):
        x = _draw(rng, p)
        y = _draw(rng, model.initial_observation[x])
        z = initial_update(model, p, y)
        total, disc = 0.0, 1.0
        for t in range(horizon):
            a = int(policy(z))
            c = model.cost[x, a]
            if math.isinf(c):
                diags.append(f"episode {ep}, t={t}: action {model.actions[a]!r} "
                             f"is infeasible in state {model.states[x]!r}")
                total = math.inf
                break
            total += disc * c
            disc *= model.discount
            x = _draw(rng, model.transition[a, x])
            y = _draw(rng, model.observation[a, x])
            z = bayes_update(model, z, a, y)
        costs[ep] = total
    finite = costs[np.isfinite(costs)]
    aborted = episodes - len(finite)
    if aborted:
        mean, se = math.inf, math.inf
    else:
        mean = float(costs.mean())
        se = float(costs.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return SimulationResult(mean, se, episodes, horizon, costs, aborted, diags)


def initial_value(model: DiscretePomdp, V: ValueFunction, prior=None) -> float:
    """Expected value of ``V`` under the law of the first belief."""
    q0 = initial_belief(model, prior)
    return q0.expectation(V.values)
