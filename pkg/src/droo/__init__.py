"""Online binary computation offloading for wireless-powered mobile-edge networks.

A learned relaxed-action policy proposes offloading decisions, an
order-preserving quantizer turns them into a handful of binary candidates,
and an exact convex solver scores each candidate by its optimal time split.
"""

from droo.errors import ConvergenceError, DomainError
from droo.system import (
    ChannelFrame,
    SystemParams,
    harvested_energy,
    local_rate,
    offload_rate,
    weighted_sum_rate,
)
from droo.solver import (
    AllocationResult,
    BatchAllocation,
    SolverConfig,
    grid_oracle_p2,
    solve_batch,
    solve_p2,
)
from droo.channel import (
    EpisodeSpec,
    Topology,
    make_topology,
    path_loss,
    sample_frame,
)
from droo.quantize import knn_quantize, order_preserving_quantize
from droo.policy import PolicyNet, ReplayMemory, TrainConfig, train_step
from droo.agent import AdaptiveK, AgentConfig, DrooAgent, FrameResult, run_episode, update_k
from droo.baselines import all_edge, all_local, coordinate_descent, exhaustive_opt, exhaustive_rates

__version__ = "0.1.0"

__all__ = [
    "AdaptiveK",
    "AgentConfig",
    "AllocationResult",
    "BatchAllocation",
    "ChannelFrame",
    "ConvergenceError",
    "DomainError",
    "DrooAgent",
    "EpisodeSpec",
    "FrameResult",
    "PolicyNet",
    "ReplayMemory",
    "SolverConfig",
    "SystemParams",
    "Topology",
    "TrainConfig",
    "all_edge",
    "all_local",
    "coordinate_descent",
    "exhaustive_opt",
    "exhaustive_rates",
    "grid_oracle_p2",
    "harvested_energy",
    "knn_quantize",
    "local_rate",
    "make_topology",
    "offload_rate",
    "order_preserving_quantize",
    "path_loss",
    "run_episode",
    "sample_frame",
    "solve_batch",
    "solve_p2",
    "train_step",
    "update_k",
    "weighted_sum_rate",
]
