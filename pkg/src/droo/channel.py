"""Free-space path loss with i.i.d. Rayleigh (unit-mean exponential power) fading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from droo import rng as rngmod
from droo.errors import DomainError
from droo.system import ChannelFrame, SystemParams

SPEED_OF_LIGHT = 3e8
DIST_RANGE = (2.5, 5.2)


def path_loss(d, p: SystemParams):
    """Mean channel gain at distance d (meters)."""
    d = np.asarray(d, float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    out = p.antenna_gain * (SPEED_OF_LIGHT / (4 * np.pi * p.carrier_hz * d)) ** p.pathloss_exp
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Topology:
    distances: np.ndarray
    mean_gains: np.ndarray = field(default=None)
    seed: int | None = None

    @classmethod
    def from_distances(cls, distances, p: SystemParams, seed=None) -> Topology:
        d = np.asarray(distances, float)
        return cls(distances=d, mean_gains=np.asarray(path_loss(d, p), float), seed=seed)

    @property
    def n(self) -> int:
        return len(self.distances)

    def to_json(self, weights=None) -> str:
        doc = {"distances": self.distances.tolist(), "seed": self.seed}
        if weights is not None:
            doc["weights"] = np.asarray(weights, float).tolist()
        return json.dumps(doc, indent=2)

    def save(self, path, weights=None):
        Path(path).write_text(self.to_json(weights))

    @classmethod
    def load(cls, path, p: SystemParams) -> tuple[Topology, np.ndarray | None]:
        """Read a topology document; returns (topology, weights or None)."""
        doc = json.loads(Path(path).read_text())
        topo = cls.from_distances(doc["distances"], p, seed=doc.get("seed"))
        w = doc.get("weights")
        return topo, (None if w is None else np.asarray(w, float))


@dataclass(frozen=True)
class EpisodeSpec:
    n_frames: int
    seed: int
    topology: Topology

    def __post_init__(self):
        if self.n_frames < 1:
            raise DomainError("an episode needs at least one frame")


def make_topology(n: int, seed: int, p: SystemParams) -> Topology:
    if n < 1:
        raise DomainError("n must be >= 1")
    g = rngmod.stream(seed, rngmod.TOPOLOGY)
    d = g.uniform(*DIST_RANGE, size=n)
    return Topology.from_distances(d, p, seed=seed)


def fading(n: int, t: int, seed: int) -> np.ndarray:
    """Unit-mean exponential power fading for frame t, by inverse CDF."""
    u = rngmod.stream(seed, rngmod.CHANNEL, t).random(n)
    return -np.log1p(-u)


def sample_frame(topology: Topology, t: int, seed: int) -> ChannelFrame:
    return ChannelFrame(t=t, h=topology.mean_gains * fading(topology.n, t, seed))
