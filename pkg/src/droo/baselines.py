"""Reference offloading policies: exhaustive search, coordinate descent, all-local, all-edge."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from droo.errors import DomainError
from droo.quantize import all_vertices
from droo.solver import AllocationResult, SolverConfig, solve_batch
from droo.system import SystemParams

EXHAUSTIVE_MAX_N = 12
CD_MIN_GAIN = 1e-9

BASELINES = ("exhaustive", "cd", "local", "edge")


@lru_cache(maxsize=16)
def _vertices(n):
    v = all_vertices(n)
    v.setflags(write=False)
    return v


def exhaustive_opt(h, p: SystemParams, cfg: SolverConfig | None = None):
    """Best of all 2^N decisions; ties go to the lexicographically smallest."""
    if p.n > EXHAUSTIVE_MAX_N:
        raise DomainError(f"exhaustive search is limited to N <= {EXHAUSTIVE_MAX_N}, got {p.n}")
    X = _vertices(p.n)
    res = solve_batch(h, X, p, cfg)
    best = int(np.argmax(res.q))
    return X[best].copy(), res.row(best)


def exhaustive_rates(H, p: SystemParams, cfg: SolverConfig | None = None, chunk: int = 64) -> np.ndarray:
    """Optimal weighted rate for each row of a (frames, N) gain matrix.

    Same answer as exhaustive_opt per frame; frames are stacked so one solver
    call covers many of them.
    """
    if p.n > EXHAUSTIVE_MAX_N:
        raise DomainError(f"exhaustive search is limited to N <= {EXHAUSTIVE_MAX_N}, got {p.n}")
    H = np.atleast_2d(np.asarray(H, float))
    X = _vertices(p.n)
    out = np.empty(len(H))
    for s in range(0, len(H), chunk):
        Hc = H[s : s + chunk]
        res = solve_batch(np.repeat(Hc, len(X), axis=0), np.tile(X, (len(Hc), 1)), p, cfg)
        out[s : s + chunk] = res.q.reshape(len(Hc), len(X)).max(axis=1)
    return out


def coordinate_descent(h, p: SystemParams, cfg: SolverConfig | None = None, start=None):
    """Repeatedly apply the single-device mode flip with the largest gain.

    Starts from all-local unless ``start`` is given; stops when no flip
    improves the rate by more than CD_MIN_GAIN.
    """
    n = p.n
    x = np.zeros(n, np.int8) if start is None else np.array(start, np.int8)
    flips = np.eye(n, dtype=np.int8)
    current = solve_batch(h, x, p, cfg).row(0)
    while True:
        trial = x[None, :] ^ flips
        res = solve_batch(h, trial, p, cfg)
        best = int(np.argmax(res.q))
        if res.q[best] <= current.q + CD_MIN_GAIN:
            return x, current
        x = trial[best]
        current = res.row(best)


def all_local(h, p: SystemParams, cfg: SolverConfig | None = None) -> AllocationResult:
    return solve_batch(h, np.zeros(p.n, np.int8), p, cfg).row(0)


def all_edge(h, p: SystemParams, cfg: SolverConfig | None = None) -> AllocationResult:
    return solve_batch(h, np.ones(p.n, np.int8), p, cfg).row(0)


def oracle_rate(kind: str, h, p: SystemParams, cfg: SolverConfig | None = None) -> float:
    """Denominator of the normalized rate for the chosen reference policy."""
    if kind == "exhaustive":
        return exhaustive_opt(h, p, cfg)[1].q
    if kind == "cd":
        return coordinate_descent(h, p, cfg)[1].q
    if kind == "local":
        return all_local(h, p, cfg).q
    if kind == "edge":
        return all_edge(h, p, cfg).q
    raise DomainError(f"unknown baseline {kind!r}")
