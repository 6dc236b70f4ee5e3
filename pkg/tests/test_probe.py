from fractions import Fraction

import numpy as np
import pytest

from comdp.measures import FiniteMeasure, MetricSupport, dyadic_intervals, wasserstein1
from comdp.models import build_dyadic_density, build_mdmii_dyadic, build_sign_switch
from comdp.probe import (oscillating_q_mass, posterior_gaps, probe_kernel, sign_switch_posterior_limits,
                         sign_switch_posterior_sequences,
                         verdict)
from oracles import random_model

HALF = [0.5, 0.5]


def test_verdict_rule():
    assert verdict([1.0] * 8) == "stalled"
    assert verdict([1.0] * 4 + [1e-4] * 4) == "converging"
    assert verdict([0.01] + [1.0] * 7) == "diverging"
    # tail window is max(4, ceil(len / 4)): 5 entries for length 20
    assert verdict([1.0] * 15 + [1e-4] * 5) == "converging"
    assert verdict([1.0] * 16 + [1e-4] * 4) == "stalled"


def test_belief_kernel_tv_gap_is_one_on_dyadic_model():
    m = build_dyadic_density(8)
    seq = [(HALF, j) for j in range(1, 9)]
    rep = probe_kernel(m, "belief_transition", seq, (HALF, 0), "tv")
    np.testing.assert_allclose(rep.gaps, 1.0, atol=1e-12)
    assert rep.verdict == "stalled"


def test_belief_kernel_weak_gap_constant_closed_form():
    m = build_dyadic_density(8)
    seq = [(HALF, j) for j in range(1, 9)]
    rep = probe_kernel(m, "belief_transition", seq, (HALF, 0), "weak")
    z = np.array(HALF)
    want = 0.75 * np.linalg.norm(np.array([1 / 3, 2 / 3]) - z) + 0.25 * np.linalg.norm(np.array([1.0, 0.0]) - z)
    np.testing.assert_allclose(rep.gaps, want, atol=1e-12)
    assert rep.verdict == "stalled"
    assert rep.limit_estimate == pytest.approx(want)


def test_constant_kernel_converges():
    m = random_model(np.random.default_rng(0), 2, 3, 1)
    rep = probe_kernel(m, "obs_marginal", [(HALF, 0)] * 8, (HALF, 0), "weak")
    assert np.all(rep.gaps == 0.0)
    assert rep.verdict == "converging"


def test_probe_rejections():
    m = build_dyadic_density(3)
    seq = [(HALF, 1)] * 8
    with pytest.raises(ValueError):
        probe_kernel(m, "obs_marginal", seq[:7], (HALF, 0), "tv")
    with pytest.raises(ValueError):
        probe_kernel(m, "obs_marginal", seq, (HALF, 0), "setwise")
    with pytest.raises(ValueError):
        probe_kernel(m, "bogus", seq, (HALF, 0), "tv")


def test_observation_kernel_dichotomy():
    m = build_dyadic_density(13)
    seq = [([0, 1], j) for j in range(1, 14)]
    tv = probe_kernel(m, "obs_marginal", seq, ([0, 1], 0), "tv")
    np.testing.assert_allclose(tv.gaps, 0.5, atol=1e-12)
    assert tv.verdict == "stalled"
    sw = probe_kernel(m, "obs_marginal", seq, ([0, 1], 0), "setwise", dyadic_intervals(13))
    assert np.all(sw.gaps <= 0.5 ** (np.arange(1, 14) - 1) + 1e-15)
    assert sw.verdict == "converging"


def test_mode_ordering_on_probed_pairs():
    m = build_dyadic_density(6)
    seq = [([0.3, 0.7], j) for j in range(1, 7)] + [([0.3, 0.7], 0)] * 2
    tv = probe_kernel(m, "obs_marginal", seq, ([0.3, 0.7], 0), "tv")
    sw = probe_kernel(m, "obs_marginal", seq, ([0.3, 0.7], 0), "setwise", dyadic_intervals(6))
    weak = probe_kernel(m, "obs_marginal", seq, ([0.3, 0.7], 0), "weak")
    assert np.all(sw.gaps <= 2 * tv.gaps + 1e-15)
    assert np.all(weak.gaps <= 1.0 * tv.gaps + 1e-12)  # observation coordinates lie in (0, 1)


def test_oscillating_mass_closed_form():
    assert oscillating_q_mass(3) == Fraction(1, 2)
    assert oscillating_q_mass(1) == Fraction(1, 2)
    assert abs(float(oscillating_q_mass(300)) - 1 / 3) <= 0.02
    with pytest.raises(ValueError):
        oscillating_q_mass(0)


def test_sign_switch_limits():
    m = build_sign_switch(1000)
    left, right = sign_switch_posterior_sequences(m, 1000)
    assert left[1] == pytest.approx(2 / 3, abs=1e-12)
    assert right[1] == pytest.approx(1 / 3, abs=1e-12)
    assert left[-1] >= 0.999 and right[-1] <= 0.001
    assert sign_switch_posterior_limits(1000) == (left[-1], right[-1])
    with pytest.raises(ValueError):
        sign_switch_posterior_limits(1)


def test_posterior_gaps_on_sign_switch():
    m = build_sign_switch(20)
    idx = {a: i for i, a in enumerate(m.action_coords[:, 0])}
    seq = [(HALF, idx[-1.0 / k]) for k in range(2, 21)]
    gaps = posterior_gaps(m, seq, (HALF, idx[0.0]))
    # at a = 0 the first observation has zero likelihood and the posterior is z itself
    assert gaps.shape == (19, 2)
    assert gaps[-1, 0] == pytest.approx(np.linalg.norm(np.array([20 / 21, 1 / 21]) - 0.5), abs=1e-12)


def test_mdmii_weak_gap_stays_away_from_zero():
    m = build_mdmii_dyadic(8)
    z = np.full(m.n_states, 1.0 / m.n_states)
    rep = probe_kernel(m, "belief_transition", [(z, j) for j in range(1, 9)], (z, 0), "weak")
    assert rep.gaps[-4:].min() > 0.1
    assert rep.verdict == "stalled"


def test_weak_gap_bounded_by_diameter_times_tv_for_beliefs():
    m = build_dyadic_density(4)
    seq = [(HALF, j) for j in range(1, 5)] * 2
    weak = probe_kernel(m, "belief_transition", seq, (HALF, 0), "weak")
    tv = probe_kernel(m, "belief_transition", seq, (HALF, 0), "tv")
    assert np.all(weak.gaps <= np.sqrt(2) * tv.gaps + 1e-12)
