"""Threshold rate allocation for bandwidth-sharing networks in heavy traffic."""
from .network import NetworkSpec, load_network, validate, scaled_params
from .workload import classify, lp_min_cost, workload_cost, qstar
from .ranking import Ranking, find_viable_ranking
from .policy import PolicyParams, ControlState, ThresholdPolicy, rate_vector
from .simulate import SimResult, CostReport, simulate_replications
from .diffusion import RbmConfig, hgi_discounted, hgi_ergodic

__version__ = "0.1.0"
