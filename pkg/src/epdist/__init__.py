"""Entanglement-pair distribution over quantum repeater networks: models, estimators, policies, simulation."""

from .ages import EpView, PendingView, StateSnapshot, estimate_min_latency, post_swap_estimate
from .bench import ExperimentSpec, ResultRow, run_sweep, summarize
from .network import (InfeasibleError, NetLink, NetNode, PhysicalParams, QuantumNetwork,
                      line_network, link_expected_latency, waxman_generate)
from .policies import PolicyConfig, build_policy, swap_or_wait
from .simulator import EpisodeResult, Simulation, run_episode
from .swapdp import SwapTree, brute_force_tree_oracle, dp_optimal, dp_optimal_on_path

__all__ = [
    "EpView", "PendingView", "StateSnapshot", "estimate_min_latency", "post_swap_estimate",
    "ExperimentSpec", "ResultRow", "run_sweep", "summarize",
    "InfeasibleError", "NetLink", "NetNode", "PhysicalParams", "QuantumNetwork",
    "line_network", "link_expected_latency", "waxman_generate",
    "PolicyConfig", "build_policy", "swap_or_wait",
    "EpisodeResult", "Simulation", "run_episode",
    "SwapTree", "brute_force_tree_oracle", "dp_optimal", "dp_optimal_on_path",
]
