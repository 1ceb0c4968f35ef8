"""The per-frame online loop: relax, quantize, score, select, store, train."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from droo import rng as rngmod
from droo.channel import EpisodeSpec, sample_frame
from droo.errors import DomainError
from droo.policy import PolicyNet, ReplayMemory, TrainConfig, train_step
from droo.quantize import knn_quantize, order_preserving_quantize
from droo.solver import AllocationResult, BatchAllocation, SolverConfig, solve_batch
from droo.system import ChannelFrame, SystemParams

QUANTIZERS = {"op": order_preserving_quantize, "knn": knn_quantize}


@dataclass(frozen=True)
class AgentConfig:
    k_mode: str = "fixed"
    k: int | None = None  # defaults to N
    delta: int = 32
    quantizer: str = "op"
    hidden: tuple = (120, 80)
    train: TrainConfig = field(default_factory=TrainConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        if self.k_mode not in ("fixed", "adaptive"):
            raise DomainError(f"k_mode must be 'fixed' or 'adaptive', got {self.k_mode!r}")
        if self.quantizer not in QUANTIZERS:
            raise DomainError(f"quantizer must be one of {sorted(QUANTIZERS)}, got {self.quantizer!r}")
        if self.delta < 1:
            raise DomainError("delta must be >= 1")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")


@dataclass
class AdaptiveK:
    mode: str
    k_now: int
    delta: int
    history: list = field(default_factory=list)


@dataclass
class FrameResult:
    t: int
    x_star: np.ndarray
    alloc: AllocationResult
    k_star: int
    K_used: int
    loss: float | None
    wall_us: int
    candidates: np.ndarray = field(repr=False, default=None)
    candidate_q: np.ndarray = field(repr=False, default=None)

    @property
    def q(self) -> float:
        return self.alloc.q


def update_k(history, n: int) -> int:
    """K for the next window: one more than the deepest winning index, capped at N."""
    if len(history) == 0:
        raise DomainError("adaptive K update needs at least one observed index")
    return int(min(max(history) + 1, n))


class DrooAgent:
    def __init__(self, params: SystemParams, config: AgentConfig | None = None, seed: int = 0):
        self.params = params
        self.config = config = config or AgentConfig()
        self.seed = seed
        n = params.n
        k0 = n if config.k is None else config.k
        kmax = n + 1 if config.quantizer == "op" else 2**n
        if not (1 <= k0 <= kmax):
            raise DomainError(f"K must lie in [1, {kmax}], got {k0}")
        if config.k_mode == "adaptive":
            k0 = n
        self.kstate = AdaptiveK(config.k_mode, k0, config.delta)
        self.net = PolicyNet.init([n, *config.hidden, n], seed, config.train.learning_rate)
        self.memory = ReplayMemory(config.train.memory_size, n)
        self._quantize = QUANTIZERS[config.quantizer]
        self._pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def set_params(self, params: SystemParams):
        if params.n != self.params.n:
            raise DomainError("device count cannot change mid-episode")
        self.params = params

    def evaluate(self, h, candidates) -> BatchAllocation:
        """Optimal allocation for every candidate; rows are solved independently."""
        if self._pool is None or len(candidates) < 2:
            return solve_batch(h, candidates, self.params, self.config.solver)
        chunks = np.array_split(candidates, min(self.config.workers, len(candidates)))
        parts = list(self._pool.map(lambda c: solve_batch(h, c, self.params, self.config.solver), chunks))
        return BatchAllocation(
            q=np.concatenate([p.q for p in parts]),
            a=np.concatenate([p.a for p in parts]),
            tau=np.concatenate([p.tau for p in parts]),
        )

    def step(self, frame: ChannelFrame) -> FrameResult:
        start = time.perf_counter_ns()
        cfg = self.config
        ks = self.kstate
        t = frame.t
        h = frame.h
        if h.shape != (self.params.n,):
            raise DomainError(f"frame has {h.shape} gains, expected ({self.params.n},)")
        if ks.mode == "adaptive" and t > 1 and t % ks.delta == 0 and ks.history:
            ks.k_now = update_k(ks.history, self.params.n)
            ks.history.clear()

        h_scaled = h * cfg.train.input_scale
        xhat = self.net.forward(h_scaled)
        cands = self._quantize(xhat, ks.k_now)
        batch = self.evaluate(h, cands)
        best = int(np.argmax(batch.q))  # first maximum: smallest index wins ties
        x_star = cands[best]

        # switched-off devices (zero gain) are labelled local so the net learns to skip them
        self.memory.push(h_scaled, np.where(h > 0, x_star, 0))
        loss = None
        if t % cfg.train.train_interval == 0:
            loss = train_step(self.net, self.memory, cfg.train, rngmod.stream(self.seed, rngmod.REPLAY, t))
        if ks.mode == "adaptive":
            ks.history.append(best + 1)

        return FrameResult(
            t=t,
            x_star=x_star.copy(),
            alloc=batch.row(best),
            k_star=best + 1,
            K_used=len(cands),
            loss=loss,
            wall_us=(time.perf_counter_ns() - start) // 1000,
            candidates=cands,
            candidate_q=batch.q,
        )


def run_episode(spec: EpisodeSpec, params: SystemParams, config: AgentConfig | None = None) -> list[FrameResult]:
    """Run frames 1..M on the seeded channel sequence of spec.topology."""
    if spec.topology.n != params.n:
        raise DomainError("topology and system parameters disagree on N")
    agent = DrooAgent(params, config, seed=spec.seed)
    try:
        return [agent.step(sample_frame(spec.topology, t, spec.seed)) for t in range(1, spec.n_frames + 1)]
    finally:
        agent.close()
