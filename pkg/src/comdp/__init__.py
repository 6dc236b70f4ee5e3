"""Partially observable MDPs solved through their belief-state reduction,
with tools for probing the continuity of the reduced kernels."""

from .filtering import (BeliefDistribution, bayes_update, belief_transition, filter_history,
                        initial_belief, joint_update, obs_marginal)
from .measures import FiniteMeasure, Interval, MetricSupport, PointSet, setwise_gap, tv_distance, wasserstein1
from .model import DiscretePomdp, ModelError, load_model, save_model, shift_costs, validate
from .probe import ProbeReport, probe_kernel
from .solver import (AlphaVectorSet, BeliefGridValues, GreedyPolicy, alpha_backup, optimality_residual,
                     simulate_policy, solve_finite_horizon, value_iterate_grid)

__all__ = [
    "AlphaVectorSet", "BeliefDistribution", "BeliefGridValues", "DiscretePomdp", "FiniteMeasure",
    "GreedyPolicy", "Interval", "MetricSupport", "ModelError", "PointSet", "ProbeReport",
    "alpha_backup", "bayes_update", "belief_transition", "filter_history", "initial_belief",
    "joint_update", "load_model", "obs_marginal", "optimality_residual", "probe_kernel",
    "save_model", "setwise_gap", "shift_costs", "simulate_policy", "solve_finite_horizon",
    "tv_distance", "validate", "value_iterate_grid", "wasserstein1",
]
