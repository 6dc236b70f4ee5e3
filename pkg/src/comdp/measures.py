"""Finitely supported probability measures and the distances used to probe
weak, setwise and total-variation convergence."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

MERGE_TOL = 1e-12
_METRIC_KINDS = ("euclidean-1d", "euclidean-nd", "container")


@dataclass(frozen=True)
class MetricSupport:
    """Metric on the points that carry a measure.

    ``container`` is the inventory metric: ``|a - b|`` inside one container
    and ``|a - b| + 1`` across containers. Containers are the intervals cut
    at ``cuts``; a point equal to a cut belongs to the container on its left.
    """

    kind: str = "euclidean-1d"
    cuts: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in _METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        cuts = tuple(float(c) for c in self.cuts)
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("container cut points must be strictly increasing")
        if self.kind != "container" and cuts:
            raise ValueError("cut points are only meaningful for the container metric")
        object.__setattr__(self, "cuts", cuts)

    @property
    def one_dimensional(self) -> bool:
        return self.kind != "euclidean-nd"

    def container_of(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float).reshape(-1)
        return np.searchsorted(np.asarray(self.cuts), x, side="left")

    def pairwise(self, a, b) -> np.ndarray:
        a = _as_points(a)
        b = _as_points(b)
        if a.shape[1] != b.shape[1]:
            raise ValueError("points of different dimension")
        if self.one_dimensional:
            d = np.abs(a[:, 0][:, None] - b[:, 0][None, :])
            if self.kind == "container":
                same = self.container_of(a)[:, None] == self.container_of(b)[None, :]
                d = d + (~same)
            return d
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def distance(self, u, v) -> float:
        return float(self.pairwise(u, v)[0, 0])


def _as_points(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def cluster_points(points: np.ndarray, support: MetricSupport, tol: float = MERGE_TOL) -> np.ndarray:
    """Group labels for points closer than ``tol``; groups are numbered in
    order of first occurrence."""
    pts = _as_points(points)
    k = len(pts)
    labels = np.full(k, -1, dtype=np.int64)
    if k == 0:
        return labels
    if support.one_dimensional:
        order = np.argsort(pts[:, 0], kind="stable")
        x = pts[order, 0]
        new = np.ones(k, dtype=bool)
        new[1:] = np.diff(x) >= tol
        if support.kind == "container":
            c = support.container_of(x)
            new[1:] |= c[1:] != c[:-1]
        raw = np.cumsum(new) - 1
        sorted_labels = np.empty(k, dtype=np.int64)
        sorted_labels[order] = raw
        _, first = np.unique(sorted_labels, return_index=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return rank[sorted_labels]
    # first-occurrence greedy grouping, componentwise
    nxt = 0
    unassigned = np.ones(k, dtype=bool)
    while unassigned.any():
        i = int(np.argmax(unassigned))
        close = unassigned & np.all(np.abs(pts - pts[i]) < tol, axis=1)
        close[i] = True
        labels[close] = nxt
        unassigned &= ~close
        nxt += 1
    return labels


class FiniteMeasure:
    """Probability measure with finitely many atoms.

    Atoms closer than 1e-12 are merged on construction (weights summed, the
    first occurrence is kept). Zero-weight atoms are kept unless
    ``drop_zero`` is set.
    """

    def __init__(self, atoms, weights, support: MetricSupport | None = None,
                 *, drop_zero: bool = False, atol: float = 1e-12):
        pts = _as_points(atoms)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise ValueError("atoms and weights differ in length")
        if support is None:
            support = MetricSupport("euclidean-1d" if pts.shape[1] == 1 else "euclidean-nd")
        if support.one_dimensional and pts.shape[1] != 1:
            raise ValueError(f"{support.kind} support needs scalar atoms")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atoms must be finite points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > atol:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if drop_zero:
            keep = w > 0
            pts, w = pts[keep], w[keep]
        labels = cluster_points(pts, support)
        n = int(labels.max()) + 1 if len(labels) else 0
        merged = np.zeros(n)
        np.add.at(merged, labels, w)
        _, first = np.unique(labels, return_index=True)
        self.atoms = pts[first]
        self.weights = merged
        self.support = support
        self.atoms.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def point_mass(cls, point, support: MetricSupport | None = None) -> "FiniteMeasure":
        pts = np.atleast_1d(np.asarray(point, dtype=float))
        scalar = support.one_dimensional if support is not None else pts.size == 1
        return cls(pts.reshape(1, 1) if scalar else pts.reshape(1, -1), [1.0], support)

    @property
    def dimension(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"FiniteMeasure({len(self)} atoms, {self.support.kind})"

    def mass(self, test_set) -> float:
        return float(self.weights[_membership(test_set, self.atoms)].sum())


def _check_compatible(p: FiniteMeasure, q: FiniteMeasure):
    if p.support != q.support:
        raise ValueError(f"measures live on different metric spaces: {p.support} vs {q.support}")
    if p.dimension != q.dimension:
        raise ValueError(f"atom dimension mismatch: {p.dimension} vs {q.dimension}")


def _signed_union(p: FiniteMeasure, q: FiniteMeasure):
    """Atoms of p and q merged; returns (atoms, p-weights, q-weights)."""
    pts = np.vstack([p.atoms, q.atoms])
    labels = cluster_points(pts, p.support)
    n = int(labels.max()) + 1
    wp = np.zeros(n)
    wq = np.zeros(n)
    np.add.at(wp, labels[: len(p)], p.weights)
    np.add.at(wq, labels[len(p):], q.weights)
    _, first = np.unique(labels, return_index=True)
    return pts[first], wp, wq


def tv_distance(p: FiniteMeasure, q: FiniteMeasure) -> float:
    """Total-variation distance ``sup_B |p(B) - q(B)|``."""
    _check_compatible(p, q)
    _, wp, wq = _signed_union(p, q)
    return float(min(1.0, 0.5 * np.abs(wp - wq).sum()))


@dataclass(frozen=True)
class Interval:
    """Interval of the real line; open ends by default."""

    lo: float
    hi: float
    closed_lo: bool = False
    closed_hi: bool = False

    def contains(self, atoms) -> np.ndarray:
        x = _as_points(atoms)[:, 0]
        left = x >= self.lo if self.closed_lo else x > self.lo
        right = x <= self.hi if self.closed_hi else x < self.hi
        return left & right


@dataclass(frozen=True)
class PointSet:
    """Finite set of points, matched within the merge tolerance."""

    points: tuple

    def contains(self, atoms) -> np.ndarray:
        pts = _as_points(atoms)
        ref = _as_points(np.asarray(self.points, dtype=float))
        if ref.shape[1] != pts.shape[1]:
            ref = ref.reshape(-1, pts.shape[1])
        close = np.all(np.abs(pts[:, None, :] - ref[None, :, :]) < MERGE_TOL, axis=2)
        return close.any(axis=1)


TestSet = Union[Interval, PointSet, Callable[[np.ndarray], bool]]


def _membership(test_set, atoms: np.ndarray) -> np.ndarray:
    if hasattr(test_set, "contains"):
        return np.asarray(test_set.contains(atoms), dtype=bool)
    return np.fromiter((bool(test_set(a if len(a) > 1 else a[0])) for a in atoms),
                       dtype=bool, count=len(atoms))


def dyadic_intervals(depth: int) -> list[Interval]:
    """All open dyadic subintervals ``(k/2^l, (k+1)/2^l)`` of (0, 1), l <= depth."""
    return [Interval(k / 2 ** l, (k + 1) / 2 ** l)
            for l in range(depth + 1) for k in range(2 ** l)]


def setwise_gap(p: FiniteMeasure, q: FiniteMeasure, sets: Sequence[TestSet]) -> float:
    """``max_S |p(S) - q(S)|`` over the supplied test family.

    An empty family gives 0 and a ``RuntimeWarning``.
    """
    _check_compatible(p, q)
    sets = list(sets)
    if not sets:
        warnings.warn("setwise_gap called with an empty test family", RuntimeWarning, stacklevel=2)
        return 0.0
    atoms, wp, wq = _signed_union(p, q)
    diff = wp - wq
    intervals = [s for s in sets if isinstance(s, Interval)]
    others = [s for s in sets if not isinstance(s, Interval)]
    gap = 0.0
    if intervals and p.support.one_dimensional:
        gap = max(gap, _interval_gaps(atoms[:, 0], diff, intervals))
    else:
        others = sets
    for s in others:
        gap = max(gap, abs(float(diff[_membership(s, atoms)].sum())))
    return gap


def _interval_gaps(x: np.ndarray, diff: np.ndarray, intervals: list[Interval]) -> float:
    order = np.argsort(x)
    xs = x[order]
    csum = np.concatenate([[0.0], np.cumsum(diff[order])])
    lo = np.array([s.lo for s in intervals])
    hi = np.array([s.hi for s in intervals])
    closed_lo = np.array([s.closed_lo for s in intervals])
    closed_hi = np.array([s.closed_hi for s in intervals])
    i0 = np.where(closed_lo, np.searchsorted(xs, lo, "left"), np.searchsorted(xs, lo, "right"))
    i1 = np.where(closed_hi, np.searchsorted(xs, hi, "right"), np.searchsorted(xs, hi, "left"))
    vals = np.where(i1 > i0, csum[np.maximum(i1, i0)] - csum[i0], 0.0)
    return float(np.abs(vals).max())


def wasserstein1(p: FiniteMeasure, q: FiniteMeasure) -> float:
    """Exact Wasserstein-1 distance with the support metric as ground cost."""
    _check_compatible(p, q)
    if p.support.kind == "euclidean-1d":
        # exact: W1 = integral of |F_p - F_q| on the line
        atoms, wp, wq = _signed_union(p, q)
        order = np.argsort(atoms[:, 0])
        x = atoms[order, 0]
        cdf = np.cumsum((wp - wq)[order])[:-1]
        return float(np.sum(np.abs(cdf) * np.diff(x)))
    cost = p.support.pairwise(p.atoms, q.atoms)
    if not np.all(np.isfinite(cost)):
        raise ValueError("ground cost is not finite")
    return _transport_lp(p.weights, q.weights, cost)


def _transport_lp(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> float:
    m, n = cost.shape
    if m == 1 or n == 1:
        # the coupling is forced
        return float((cost * (a[:, None] * b[None, :])).sum())
    rows = sparse.kron(sparse.identity(m), np.ones((1, n)))
    cols = sparse.kron(np.ones((1, m)), sparse.identity(n))
    a_eq = sparse.vstack([rows, cols]).tocsr()
    b_eq = np.concatenate([a, b])
    # one marginal constraint is redundant; drop it to keep the system full rank
    res = linprog(cost.ravel(), A_eq=a_eq[:-1], b_eq=b_eq[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(max(res.fun, 0.0))


def diameter(points, support: MetricSupport) -> float:
    pts = _as_points(points)
    if len(pts) < 2:
        return 0.0
    return float(support.pairwise(pts, pts).max())
