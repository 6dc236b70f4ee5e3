"""Built-in models.

* ``build_dyadic_density``: a static two-state system observed through a
  uniform law or a dyadic on/off density; the observation kernel converges
  setwise but not in total variation and the belief kernel is discontinuous.
* ``build_sign_switch``: two-point observations whose posterior jumps when
  the action crosses 0.
* ``build_oscillating_channel``: countable observations with oscillating
  likelihoods, truncated with an explicit defect sink.
* ``build_mdmii_dyadic``: observed/unobserved product state with the dyadic
  densities in the transition law.
* ``build_inventory``: inventory with transparent and opaque containers.
* ``build_kalman``: a discretized scalar linear-Gaussian system, with the
  closed-form filter ``kalman_exact`` as a reference.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .measures import MetricSupport
from .model import DiscretePomdp, ModelError


def _dyadic_masses(level: int, cells: int) -> np.ndarray:
    """Cell masses of the density equal to 0 on even and 2 on odd dyadic
    cells of width 2**-level, on a uniform partition of (0, 1) into ``cells``."""
    k = np.arange(cells)
    coarse = (k * 2 ** level) // cells
    return np.where(coarse % 2 == 1, 2.0 / cells, 0.0)


def _indicator_cost(n_states: int, n_actions: int, hit) -> np.ndarray:
    c = np.zeros((n_states, n_actions))
    c[list(hit), :] = 1.0
    return c


def _reciprocal_actions(n: int) -> tuple[list[str], list[float]]:
    labels = ["0"] + ["1" if j == 1 else f"1/{j}" for j in range(1, n + 1)]
    coords = [0.0] + [1.0 / j for j in range(1, n + 1)]
    return labels, coords


def build_dyadic_density(n: int = 6, cells: int | None = None, *, discount: float = 0.9,
                         cost=None) -> DiscretePomdp:
    """States {1, 2} that never move; actions 0 and 1/j for j = 1..n.

    Observations are the ``cells`` equal cells of (0, 1). State 1, and state
    2 under action 0, are observed through the uniform law; state 2 under
    action 1/j through the density that is 0 on even and 2 on odd cells of
    width 2**-j. Cell masses are exact, so ``cells`` must be a multiple of
    2**n. The default cost is 1 in state 2 and 0 in state 1.
    """
    if n < 1:
        raise ValueError("density index must be >= 1")
    cells = 2 ** n if cells is None else int(cells)
    if cells % 2 ** n:
        raise ValueError(f"cells={cells} is not a multiple of 2**{n}; cell masses would be inexact")
    labels, coords = _reciprocal_actions(n)
    na = len(labels)
    uniform = np.full(cells, 1.0 / cells)
    Q = np.empty((na, 2, cells))
    Q[:, 0, :] = uniform
    Q[0, 1, :] = uniform
    for j in range(1, n + 1):
        Q[j, 1, :] = _dyadic_masses(j, cells)
    return DiscretePomdp(
        states=("1", "2"),
        observations=tuple(f"cell{k}" for k in range(cells)),
        actions=labels,
        transition=np.broadcast_to(np.eye(2), (na, 2, 2)),
        observation=Q,
        initial_observation=np.tile(uniform, (2, 1)),
        prior=[0.5, 0.5],
        cost=_indicator_cost(2, na, [1]) if cost is None else cost,
        discount=discount,
        cost_mode="P",
        state_coords=[1.0, 2.0],
        observation_coords=(np.arange(cells) + 0.5) / cells,
        action_coords=coords,
        metadata={"builder": "dyadic_density", "density_index": n, "cells": cells},
    )


def sign_switch_likelihood(a: float) -> tuple[float, float]:
    """(Q(1|a,1), Q(1|a,2)) of the sign-switch model."""
    if a < 0:
        return abs(a), a * a
    return a * a, abs(a)


def _fraction_label(a: float, k: int | None) -> str:
    if a == 0:
        return "0"
    if k is not None:
        sign = "-" if a < 0 else ""
        return f"{sign}1" if k == 1 else f"{sign}1/{k}"
    return repr(float(a))


def build_sign_switch(k_max: int = 1000, actions: Sequence[float] | None = None, *,
                      discount: float = 0.9) -> DiscretePomdp:
    """States = observations = {1, 2}, static; actions in [-1, 1].

    Q(1|a,1) = |a| for a < 0 and a^2 for a >= 0; Q(1|a,2) swaps the two
    branches. The default action grid is 0 and +-1/k for k = 1..k_max.
    """
    if actions is None:
        ks = list(range(1, k_max + 1))
        grid = [(-1.0 / k, k) for k in ks] + [(0.0, None)] + [(1.0 / k, k) for k in reversed(ks)]
    else:
        grid = [(float(a), None) for a in actions]
    if any(not -1.0 <= a <= 1.0 for a, _ in grid):
        raise ValueError("actions must lie in [-1, 1]")
    Q = np.empty((len(grid), 2, 2))
    for i, (a, _) in enumerate(grid):
        q1, q2 = sign_switch_likelihood(a)
        Q[i] = [[q1, 1.0 - q1], [q2, 1.0 - q2]]
    na = len(grid)
    return DiscretePomdp(
        states=("1", "2"),
        observations=("1", "2"),
        actions=[_fraction_label(a, k) for a, k in grid],
        transition=np.broadcast_to(np.eye(2), (na, 2, 2)),
        observation=Q,
        initial_observation=np.full((2, 2), 0.5),
        prior=[0.5, 0.5],
        cost=_indicator_cost(2, na, [1]),
        discount=discount,
        cost_mode="P",
        state_coords=[1.0, 2.0],
        observation_coords=[1.0, 2.0],
        action_coords=[a for a, _ in grid],
        metadata={"builder": "sign_switch"},
    )


def oscillating_weight(m: int, n: int) -> float:
    """a_{m,n} = 1 / (2^{k+1} m) where n = 2mk + l, 1 <= l <= 2m."""
    k = (n - 1) // (2 * m)
    return 1.0 / (2.0 ** (k + 1) * m)


def build_oscillating_channel(m_max: int = 3, truncation: int = 20, *,
                              discount: float = 0.9) -> DiscretePomdp:
    """Static states {1, 2}; actions 0 and 1/m for m = 1..m_max;
    observations 0 and 1/n.

    Under action 1/m, Q(1/n | 1/m, 1) = a_{m,n} sin^2(pi n / 2m) and
    Q(1/n | 1/m, 2) = a_{m,n} cos^2(pi n / 2m); action 0 always yields
    observation 0. Observations with n > 2m(truncation + 1) are cut and their
    total mass 2**-(truncation + 1) goes to a ``sink`` observation recorded
    in the metadata; rows are not renormalized.
    """
    if truncation < 1 or m_max < 1:
        raise ValueError("need m_max >= 1 and truncation >= 1")
    n_max = 2 * m_max * (truncation + 1)
    obs = ["0"] + ["1" if n == 1 else f"1/{n}" for n in range(1, n_max + 1)] + ["sink"]
    coords = [0.0] + [1.0 / n for n in range(1, n_max + 1)] + [-1.0]
    sink = len(obs) - 1
    defect = 2.0 ** -(truncation + 1)
    labels, acoords = _reciprocal_actions(m_max)
    na = len(labels)
    Q = np.zeros((na, 2, len(obs)))
    Q[0, :, 0] = 1.0
    for m in range(1, m_max + 1):
        n = np.arange(1, 2 * m * (truncation + 1) + 1)
        a = np.array([oscillating_weight(m, int(i)) for i in n])
        angle = np.pi * n / (2 * m)
        Q[m, 0, n] = a * np.sin(angle) ** 2
        Q[m, 1, n] = a * np.cos(angle) ** 2
        Q[m, :, sink] = defect
    Q0 = np.zeros((2, len(obs)))
    Q0[:, 0] = 1.0
    return DiscretePomdp(
        states=("1", "2"),
        observations=obs,
        actions=labels,
        transition=np.broadcast_to(np.eye(2), (na, 2, 2)),
        observation=Q,
        initial_observation=Q0,
        prior=[0.5, 0.5],
        cost=_indicator_cost(2, na, [1]),
        discount=discount,
        cost_mode="P",
        state_coords=[1.0, 2.0],
        observation_coords=coords,
        action_coords=acoords,
        metadata={"builder": "oscillating_channel", "sink_observation": "sink",
                  "truncation": truncation, "truncation_defect": defect},
    )


def build_mdmii_dyadic(n: int = 3, cells: int | None = None, *, discount: float = 0.9) -> DiscretePomdp:
    """Observed cell y of (0, 1) times a hidden, constant label w in {1, 2}.

    The next cell is drawn uniformly, except for w = 2 under action 1/j
    where it follows the dyadic density of level j. The observation is the
    cell itself. Cost is 1 when w = 2.
    """
    if n < 1:
        raise ValueError("density index must be >= 1")
    cells = 2 ** n if cells is None else int(cells)
    if cells % 2 ** n:
        raise ValueError(f"cells={cells} is not a multiple of 2**{n}")
    labels, coords = _reciprocal_actions(n)
    na = len(labels)
    nx = 2 * cells
    # state index = w * cells + k, w in {0, 1} standing for labels 1, 2
    uniform = np.full(cells, 1.0 / cells)
    P = np.zeros((na, nx, nx))
    for a in range(na):
        for w in range(2):
            row = _dyadic_masses(a, cells) if (w == 1 and a > 0) else uniform
            P[a, w * cells:(w + 1) * cells, w * cells:(w + 1) * cells] = row[None, :]
    proj = np.vstack([np.eye(cells), np.eye(cells)])
    mid = (np.arange(cells) + 0.5) / cells
    return DiscretePomdp(
        states=[f"cell{k}/w{w + 1}" for w in range(2) for k in range(cells)],
        observations=tuple(f"cell{k}" for k in range(cells)),
        actions=labels,
        transition=P,
        observation=np.broadcast_to(proj, (na, nx, cells)),
        initial_observation=proj,
        prior=np.full(nx, 1.0 / nx),
        cost=_indicator_cost(nx, na, range(cells, nx)),
        discount=discount,
        cost_mode="P",
        state_coords=np.column_stack([np.concatenate([mid, mid]), np.repeat([1.0, 2.0], cells)]),
        observation_coords=mid,
        action_coords=coords,
        metadata={"builder": "mdmii_dyadic", "density_index": n, "cells": cells},
    )


def hidden_label_marginal(model: DiscretePomdp, z) -> np.ndarray:
    """Marginal over the hidden label w of a belief on ``build_mdmii_dyadic``."""
    cells = model.metadata["cells"]
    z = np.asarray(z, dtype=float)
    return np.array([z[:cells].sum(), z[cells:].sum()])


# -- inventory ---------------------------------------------------------------

@dataclass(frozen=True)
class InventorySpec:
    """Periodic-review inventory on the grid ``level_min, ..., level_max``
    (spacing ``step``) with containers cut at ``cuts``.

    Container ``i`` is ``(cuts[i-1], cuts[i]]`` with infinite outer ends;
    ``transparent[i]`` says whether its level is observed exactly. Demand
    values and order sizes are multiples of ``step``; orders above
    ``max_order`` cost ``+inf``. Levels leaving the grid are clamped to its
    ends.
    """

    level_min: float = -4.0
    level_max: float = 8.0
    step: float = 1.0
    cuts: tuple = (-0.5,)
    transparent: tuple = (True, False)
    demand_values: tuple = (0.0, 1.0, 2.0, 3.0)
    demand_probs: tuple = (0.2, 0.4, 0.3, 0.1)
    actions: tuple = (0.0, 1.0, 2.0, 3.0)
    max_order: float = 3.0
    holding: float = 1.0
    backorder: float = 3.0
    fixed_order: float = 0.5
    unit_order: float = 1.0
    lost_sale_penalty: float = 4.0
    mode: str = "backorders"
    discount: float = 0.9
    min_container_size: float | None = None
    interior_points: tuple | None = None
    prior: tuple | None = None

    @property
    def levels(self) -> np.ndarray:
        n = int(round((self.level_max - self.level_min) / self.step))
        return self.level_min + self.step * np.arange(n + 1)

    def containers(self) -> list[tuple[float, float]]:
        edges = [-math.inf, *self.cuts, math.inf]
        return list(zip(edges[:-1], edges[1:]))

    def container_of(self, x) -> np.ndarray:
        return np.searchsorted(np.asarray(self.cuts, dtype=float), np.asarray(x, dtype=float), side="left")

    def observation_points(self) -> list[float]:
        pts = []
        for i, (lo, hi) in enumerate(self.containers()):
            if self.interior_points is not None and self.interior_points[i] is not None:
                pts.append(float(self.interior_points[i]))
            elif math.isinf(lo) and math.isinf(hi):
                pts.append(0.0)
            elif math.isinf(lo):
                pts.append(hi - 1.0)
            elif math.isinf(hi):
                pts.append(lo + 1.0)
            else:
                pts.append(0.5 * (lo + hi))
        return pts

    def check(self) -> list[str]:
        bad = []
        if self.step <= 0:
            bad.append("step must be positive")
        lv = self.levels
        if not np.any(np.isclose(lv, 0.0)):
            bad.append("the level grid must contain 0")
        cuts = np.asarray(self.cuts, dtype=float)
        if np.any(np.diff(cuts) <= 0):
            bad.append("cut points must be strictly increasing")
        gamma = self.step if self.min_container_size is None else self.min_container_size
        if gamma <= 0:
            bad.append("minimum container size must be positive")
        elif np.any(np.diff(cuts) < gamma):
            bad.append(f"a container is smaller than {gamma}")
        if len(self.transparent) != len(cuts) + 1:
            bad.append(f"need {len(cuts) + 1} transparency flags, got {len(self.transparent)}")
        on_boundary = [float(c) for c in cuts if np.any(np.abs(lv - c) < 1e-9 * max(1.0, self.step))]
        if on_boundary:
            bad.append(f"reachable levels sit on container boundaries {on_boundary}; "
                       "the boundary atoms break the container observation model")
        probs = np.asarray(self.demand_probs, dtype=float)
        if len(probs) != len(self.demand_values) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            bad.append("demand probabilities must be a probability vector over demand_values")
        for name, vals in (("demand", self.demand_values), ("order", self.actions)):
            r = np.asarray(vals, dtype=float) / self.step
            if np.any(np.abs(r - np.rint(r)) > 1e-9):
                bad.append(f"{name} values must be multiples of the step")
        if min(self.holding, self.backorder, self.fixed_order, self.unit_order, self.lost_sale_penalty) < 0:
            bad.append("cost coefficients must be nonnegative")
        if self.mode not in ("backorders", "lost-sales"):
            bad.append(f"unknown mode {self.mode!r}")
        if self.interior_points is not None:
            for i, ((lo, hi), b) in enumerate(zip(self.containers(), self.interior_points)):
                if b is not None and not lo < b < hi:
                    bad.append(f"interior point {b} is outside container {i}")
        return bad


def build_inventory(spec: InventorySpec) -> DiscretePomdp:
    bad = spec.check()
    if bad:
        raise ModelError(bad)
    lv = spec.levels
    nx = len(lv)
    acts = np.asarray(spec.actions, dtype=float)
    dvals = np.asarray(spec.demand_values, dtype=float)
    dprobs = np.asarray(spec.demand_probs, dtype=float)
    P = np.zeros((len(acts), nx, nx))
    for ai, a in enumerate(acts):
        for xi, x in enumerate(lv):
            nxt = x + a - dvals
            if spec.mode == "lost-sales":
                nxt = np.maximum(nxt, 0.0)
            j = np.clip(np.rint((nxt - spec.level_min) / spec.step).astype(int), 0, nx - 1)
            np.add.at(P[ai, xi], j, dprobs)
    hold = spec.holding * np.maximum(lv, 0) + spec.backorder * np.maximum(-lv, 0)
    order = np.where(acts > 0, spec.fixed_order, 0.0) + spec.unit_order * np.abs(acts)
    order = np.where(acts > spec.max_order + 1e-12, math.inf, order)
    cost = hold[:, None] + order[None, :]
    if spec.mode == "lost-sales":
        short = np.maximum(dvals[None, None, :] - lv[:, None, None] - acts[None, :, None], 0.0)
        cost = cost + spec.lost_sale_penalty * (short * dprobs).sum(axis=2)

    container = spec.container_of(lv)
    bpts = spec.observation_points()
    obs_labels, obs_coords, psi = [], [], np.empty(nx, dtype=int)
    opaque_index = {}
    for xi, (x, c) in enumerate(zip(lv, container)):
        if spec.transparent[c]:
            psi[xi] = len(obs_labels)
            obs_labels.append(f"x={x:g}")
            obs_coords.append(float(x))
        else:
            if c not in opaque_index:
                opaque_index[c] = len(obs_labels)
                obs_labels.append(f"B{c}")
                obs_coords.append(bpts[c])
            psi[xi] = opaque_index[c]
    Q0 = np.zeros((nx, len(obs_labels)))
    Q0[np.arange(nx), psi] = 1.0
    if spec.prior is None:
        prior = np.isclose(lv, 0.0).astype(float)
    else:
        prior = np.asarray(spec.prior, dtype=float)
    return DiscretePomdp(
        states=[f"{x:g}" for x in lv],
        observations=obs_labels,
        actions=[f"{a:g}" for a in acts],
        transition=P,
        observation=np.broadcast_to(Q0, (len(acts), nx, len(obs_labels))),
        initial_observation=Q0,
        prior=prior,
        cost=cost,
        discount=spec.discount,
        cost_mode="P",
        state_coords=lv,
        observation_coords=obs_coords,
        action_coords=acts,
        state_metric=MetricSupport("container", tuple(spec.cuts)),
        metadata={"builder": "inventory", "mode": spec.mode,
                  "observed_container": [int(container[psi == o][0]) for o in range(len(obs_labels))]},
    )


# -- Kalman ------------------------------------------------------------------

@dataclass(frozen=True)
class KalmanSpec:
    """x' = d x + b a + xi, xi ~ N(0, sigma^2); y = h x + c eta, eta ~ N(0, 1).

    Grids are ``step * k`` for ``|step * k| <= halfwidth``. The initial
    observation uses the same channel. Cost ``c1 x^2 + c2 a^2``.
    """

    d: float = 0.8
    b: float = 1.0
    h: float = 1.0
    c: float = 0.5
    sigma: float = 0.5
    c1: float = 1.0
    c2: float = 0.1
    state_halfwidth: float = 8.0
    state_step: float = 0.1
    obs_halfwidth: float | None = None
    obs_step: float | None = None
    actions: tuple = (0.0,)
    discount: float = 0.9
    prior_mean: float = 0.0
    prior_var: float = 1.0

    def grid(self, halfwidth: float, step: float) -> np.ndarray:
        n = int(math.floor(halfwidth / step + 1e-9))
        return step * np.arange(-n, n + 1)

    @property
    def state_grid(self) -> np.ndarray:
        return self.grid(self.state_halfwidth, self.state_step)

    @property
    def obs_grid(self) -> np.ndarray:
        return self.grid(self.obs_halfwidth or self.state_halfwidth, self.obs_step or self.state_step)

    def check(self) -> list[str]:
        bad = []
        if self.c == 0:
            bad.append("observation noise scale c must be nonzero")
        if self.sigma <= 0:
            bad.append("state noise sigma must be positive")
        if self.c1 < 0 or self.c2 <= 0:
            bad.append("need c1 >= 0 and c2 > 0")
        if self.state_halfwidth < 6 * self.sigma:
            bad.append(f"state grid half-width {self.state_halfwidth} < 6 sigma = {6 * self.sigma}")
        if (self.obs_halfwidth or self.state_halfwidth) < 6 * abs(self.c):
            bad.append(f"observation grid half-width < 6 |c| = {6 * abs(self.c)}")
        if self.state_step <= 0 or (self.obs_step is not None and self.obs_step <= 0):
            bad.append("grid steps must be positive")
        if self.prior_var <= 0:
            bad.append("prior variance must be positive")
        return bad


def _cell_masses(centers: np.ndarray, mean: np.ndarray, std: float) -> np.ndarray:
    """Gaussian mass of each cell around ``centers`` for each mean; rows renormalized."""
    step = centers[1] - centers[0] if len(centers) > 1 else 1.0
    lo = (centers[None, :] - step / 2 - mean[:, None]) / std
    hi = (centers[None, :] + step / 2 - mean[:, None]) / std
    # use the upper tail on the right half for accuracy
    m = np.where(lo > 0, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))
    return m / m.sum(axis=1, keepdims=True)


@dataclass
class KalmanGrid:
    """A discretized Kalman model plus helpers for checking it against the
    closed-form filter."""

    model: DiscretePomdp
    spec: KalmanSpec

    def observation_cell(self, y: float) -> int:
        g = self.spec.obs_grid
        return int(np.clip(np.rint((y - g[0]) / (g[1] - g[0])), 0, len(g) - 1))

    def exact(self, prior_mean, prior_var, actions, observations):
        return kalman_exact(self.spec, prior_mean, prior_var, actions, observations)

    def sample(self, rng: np.random.Generator, actions: Sequence[float]):
        """Continuous hidden states and observations y_0..y_T."""
        s = self.spec
        x = rng.normal(s.prior_mean, math.sqrt(s.prior_var))
        xs, ys = [x], [s.h * x + s.c * rng.standard_normal()]
        for a in actions:
            x = s.d * x + s.b * a + s.sigma * rng.standard_normal()
            xs.append(x)
            ys.append(s.h * x + s.c * rng.standard_normal())
        return np.array(xs), np.array(ys)

    def mean(self, belief) -> float:
        return float(np.asarray(belief) @ self.spec.state_grid)


def build_kalman(spec: KalmanSpec) -> KalmanGrid:
    bad = spec.check()
    if bad:
        raise ModelError(bad)
    xs = spec.state_grid
    ys = spec.obs_grid
    acts = np.asarray(spec.actions, dtype=float)
    P = np.stack([_cell_masses(xs, spec.d * xs + spec.b * a, spec.sigma) for a in acts])
    Q0 = _cell_masses(ys, spec.h * xs, abs(spec.c))
    prior = _cell_masses(xs, np.array([spec.prior_mean]), math.sqrt(spec.prior_var))[0]
    cost = spec.c1 * xs[:, None] ** 2 + spec.c2 * acts[None, :] ** 2
    model = DiscretePomdp(
        states=[f"{x:.6g}" for x in xs],
        observations=[f"{y:.6g}" for y in ys],
        actions=[f"{a:g}" for a in acts],
        transition=P,
        observation=np.broadcast_to(Q0, (len(acts),) + Q0.shape),
        initial_observation=Q0,
        prior=prior,
        cost=cost,
        discount=spec.discount,
        cost_mode="P",
        state_coords=xs,
        observation_coords=ys,
        action_coords=acts,
        metadata={"builder": "kalman", **{k: v for k, v in dataclasses.asdict(spec).items()
                                         if not isinstance(v, tuple)}},
    )
    return KalmanGrid(model, spec)


def kalman_exact(spec: KalmanSpec, prior_mean: float, prior_var: float,
                 actions: Sequence[float], observations: Sequence[float]):
    """Posterior means and variances after y_0, (a_0, y_1), ...

    ``observations`` has one more entry than ``actions``.
    """
    if len(observations) != len(actions) + 1:
        raise ValueError("need one more observation than actions")
    if spec.c == 0:
        raise ValueError("observation noise scale must be nonzero")
    m, v = float(prior_mean), float(prior_var)
    r = spec.c ** 2
    means, variances = [], []
    for t, y in enumerate(observations):
        if t > 0:
            m = spec.d * m + spec.b * actions[t - 1]
            v = spec.d ** 2 * v + spec.sigma ** 2
        gain = v * spec.h / (spec.h ** 2 * v + r)
        m = m + gain * (y - spec.h * m)
        v = (1.0 - gain * spec.h) * v
        means.append(m)
        variances.append(v)
    return np.array(means), np.array(variances)


# -- closed forms used by the probes --------------------------------------------

def oscillating_q_mass(m: int) -> Fraction:
    """Mass the belief kernel of ``build_oscillating_channel`` (no truncation)
    puts on {z : z(1) >= 3/4} from z = (1/2, 1/2) under action 1/m.

    Equals #{l in 1..2m : sin(pi l / 2m) >= sqrt(3)/2} / 2m; the condition is
    2m <= 3l <= 4m, evaluated in integers.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    count = sum(1 for l in range(1, 2 * m + 1) if 2 * m <= 3 * l <= 4 * m)
    return Fraction(count, 2 * m)


# -- registry ------------------------------------------------------------------

@dataclass(frozen=True)
class Builder:
    name: str
    fn: object
    params: dict = field(default_factory=dict)  # name -> (type, default, help)
    doc: str = ""


def _spec_params(cls) -> dict:
    out = {}
    for f in dataclasses.fields(cls):
        default = f.default
        out[f.name] = (type(default).__name__ if default is not None else "optional", default, "")
    return out


def _inventory_from_params(**kw):
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in kw.items()}
    return build_inventory(InventorySpec(**kw))


def _kalman_from_params(**kw):
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in kw.items()}
    return build_kalman(KalmanSpec(**kw)).model


BUILDERS = {
    "dyadic_density": Builder("dyadic_density", build_dyadic_density, {
        "n": ("int", 6, "largest density index; actions 0 and 1/j, j <= n"),
        "cells": ("int", None, "observation cells, a multiple of 2**n (default 2**n)"),
        "discount": ("float", 0.9, "discount factor")}),
    "sign_switch": Builder("sign_switch", build_sign_switch, {
        "k_max": ("int", 1000, "actions 0 and +-1/k for k <= k_max"),
        "discount": ("float", 0.9, "discount factor")}),
    "oscillating_channel": Builder("oscillating_channel", build_oscillating_channel, {
        "m_max": ("int", 3, "actions 0 and 1/m for m <= m_max"),
        "truncation": ("int", 20, "geometric blocks kept; defect 2**-(truncation+1)"),
        "discount": ("float", 0.9, "discount factor")}),
    "mdmii_dyadic": Builder("mdmii_dyadic", build_mdmii_dyadic, {
        "n": ("int", 3, "largest density index"),
        "cells": ("int", None, "observed cells, a multiple of 2**n"),
        "discount": ("float", 0.9, "discount factor")}),
    "inventory": Builder("inventory", _inventory_from_params, _spec_params(InventorySpec)),
    "kalman": Builder("kalman", _kalman_from_params, _spec_params(KalmanSpec)),
}
for _b in BUILDERS.values():
    object.__setattr__(_b, "doc", (getattr(_b.fn, "__doc__", None) or "").strip().split("\n")[0])
object.__setattr__(BUILDERS["inventory"], "doc", (InventorySpec.__doc__ or "").strip().split("\n")[0])
object.__setattr__(BUILDERS["kalman"], "doc", (KalmanSpec.__doc__ or "").strip().split("\n")[0])


def build(name: str, params: dict | None = None) -> DiscretePomdp:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown builder {name!r}; known: {sorted(BUILDERS)}") from None
    params = dict(params or {})
    unknown = set(params) - set(builder.params)
    if unknown:
        raise TypeError(f"unknown parameters for {name}: {sorted(unknown)}")
    return builder.fn(**params)
