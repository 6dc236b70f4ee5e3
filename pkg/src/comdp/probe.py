"""Numerical continuity probes for the observation-marginal and belief kernels.

A probe evaluates a kernel along a sequence of arguments ``(z_n, a_n)`` and
records the distance of each result to the kernel at a target ``(z, a)``.
The probe reports distances and a verdict from an explicit rule; it does not
decide whether any continuity assumption holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .filtering import bayes_update, belief_transition, obs_marginal_measure
from .measures import setwise_gap, tv_distance, wasserstein1
from .model import DiscretePomdp
from .models import build_sign_switch, oscillating_q_mass  # noqa: F401  (re-exported)

MIN_LENGTH = 8
DEFAULT_THRESHOLD = 1e-3
KERNELS = ("obs_marginal", "belief_transition")
MODES = ("weak", "setwise", "tv")

VERDICT_RULE = ("tail = last max(4, ceil(len/4)) gaps; converging if max(tail) < threshold; "
                "diverging if min(tail) > 10 * first gap; otherwise stalled")


@dataclass(frozen=True)
class ProbeReport:
    mode: str
    gaps: np.ndarray
    limit_estimate: float
    verdict: str
    threshold: float
    rule: str = VERDICT_RULE

    def to_dict(self) -> dict:
        return {"mode": self.mode, "gaps": [float(g) for g in self.gaps],
                "limit_estimate": self.limit_estimate, "verdict": self.verdict,
                "threshold": self.threshold, "rule": self.rule}


def tail_window(n: int) -> int:
    return max(4, math.ceil(n / 4))


def verdict(gaps: Sequence[float], threshold: float = DEFAULT_THRESHOLD) -> str:
    gaps = np.asarray(gaps, dtype=float)
    tail = gaps[-tail_window(len(gaps)):]
    if tail.max() < threshold:
        return "converging"
    if tail.min() > 10 * gaps[0]:
        return "diverging"
    return "stalled"


def _kernel(model: DiscretePomdp, kernel: str, z, a):
    if kernel == "obs_marginal":
        return obs_marginal_measure(model, z, a)
    return belief_transition(model, z, a).as_measure()


def probe_kernel(model: DiscretePomdp, kernel: str, sequence, target, mode: str,
                 test_sets=None, threshold: float = DEFAULT_THRESHOLD) -> ProbeReport:
    """Distances between ``kernel(z_n, a_n)`` and ``kernel(z, a)``.

    ``sequence`` is a list of ``(z_n, a_n)`` pairs and ``target`` a single
    pair. ``mode`` picks the distance: ``weak`` uses W1 (which metrizes weak
    convergence on these bounded supports), ``tv`` total variation and
    ``setwise`` the largest gap over ``test_sets``.
    """
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    sequence = list(sequence)
    if len(sequence) < MIN_LENGTH:
        raise ValueError(f"sequence needs at least {MIN_LENGTH} entries, got {len(sequence)}")
    if mode == "setwise" and not test_sets:
        raise ValueError("setwise mode needs a non-empty family of test sets")
    ref = _kernel(model, kernel, *target)
    gaps = []
    for z, a in sequence:
        m = _kernel(model, kernel, z, a)
        if mode == "tv":
            gaps.append(tv_distance(m, ref))
        elif mode == "weak":
            gaps.append(wasserstein1(m, ref))
        else:
            gaps.append(setwise_gap(m, ref, test_sets))
    gaps = np.maximum(np.array(gaps), 0.0)
    tail = gaps[-tail_window(len(gaps)):]
    return ProbeReport(mode, gaps, float(tail.mean()), verdict(gaps, threshold), threshold)


def posterior_gaps(model: DiscretePomdp, sequence, target) -> np.ndarray:
    """Euclidean distance between H(z_n, a_n, y) and H(z, a, y), one row per
    sequence entry and one column per observation."""
    z, a = target
    ref = np.array([bayes_update(model, z, a, y) for y in range(model.n_observations)])
    out = np.empty((len(sequence), model.n_observations))
    for i, (zn, an) in enumerate(sequence):
        post = np.array([bayes_update(model, zn, an, y) for y in range(model.n_observations)])
        out[i] = np.linalg.norm(post - ref, axis=1)
    return out


def sign_switch_posterior_sequences(model: DiscretePomdp, k_max: int, z=(0.5, 0.5)):
    """H(1 | z, a, 1) at a = -1/k and a = +1/k for k = 1..k_max on the
    sign-switch model; returns ``(left, right)`` arrays indexed by k - 1."""
    if k_max < 1:
        raise ValueError("k_max must be positive")
    coords = model.action_coords[:, 0]

    def at(a):
        hit = np.nonzero(np.abs(coords - a) <= 1e-15)[0]
        if not len(hit):
            raise ValueError(f"action {a} is not in the model's action grid")
        return bayes_update(model, z, int(hit[0]), 0)[0]

    ks = range(1, k_max + 1)
    left = np.array([at(-1.0 / k) for k in ks])
    right = np.array([at(1.0 / k) for k in ks])
    return left, right


def sign_switch_posterior_limits(k_max: int, model: DiscretePomdp | None = None) -> tuple[float, float]:
    """Estimates of the one-sided limits of H(1 | z, a, 1) as a -> 0 from
    below and from above: the values at a = -1/k_max and a = +1/k_max."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    model = build_sign_switch(k_max) if model is None else model
    left, right = sign_switch_posterior_sequences(model, k_max)
    return float(left[-1]), float(right[-1])
