"""Experiment driver: scenario schedules, per-frame metrics, CSV + JSON sidecar."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from droo import rng as rngmod
from droo.agent import AgentConfig, DrooAgent
from droo.baselines import EXHAUSTIVE_MAX_N, all_edge, all_local, coordinate_descent, exhaustive_rates
from droo.channel import Topology, make_topology, sample_frame
from droo.errors import DomainError
from droo.policy import PolicyNet, TrainConfig
from droo.system import SystemParams, default_weights

log = logging.getLogger(__name__)

CSV_HEADER = ["t", "q_droo", "q_oracle", "q_hat", "k_star", "K_t", "loss", "wall_us"]
SCENARIOS = (
    "baseline",
    "alt-weights",
    "surge",
    "onoff",
    "quantizer-sweep",
    "delta-sweep",
    "hyper-sweep",
    "rate-compare",
)
ORACLES = ("exhaustive", "cd", "none")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "baseline"
    n: int = 10
    frames: int = 10000
    seed: int = 0
    k_mode: str = "fixed"
    k: int | None = None
    delta: int = 32
    quantizer: str = "op"
    oracle: str = "exhaustive"
    hidden: list = field(default_factory=lambda: [120, 80])
    batch_size: int = 128
    train_interval: int = 10
    memory_size: int = 1024
    learning_rate: float = 0.01
    input_scale: float = 1e6
    with_replacement: bool = True
    workers: int = 1
    timing: bool = True
    debug_dump: bool = False
    distances: list | None = None
    weights: list | None = None
    schedule: list | None = None
    train_frames: int = 24000
    eval_frames: int = 6000
    rate_compare_n: list = field(default_factory=lambda: [10, 20, 30])
    sweep_k: list = field(default_factory=lambda: [1, 2, 5, 10])
    sweep_delta: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64, 128])
    load_policy: str | None = None
    save_policy: str | None = None

    def validate(self, where=lambda key: ""):
        def bad(key, msg):
            raise ConfigError(f"{key}{where(key)}: {msg}")

        if self.scenario not in SCENARIOS:
            bad("scenario", f"must be one of {', '.join(SCENARIOS)}")
        if self.oracle not in ORACLES:
            bad("oracle", f"must be one of {', '.join(ORACLES)}")
        if self.k_mode not in ("fixed", "adaptive"):
            bad("k_mode", "must be 'fixed' or 'adaptive'")
        if self.quantizer not in ("op", "knn"):
            bad("quantizer", "must be 'op' or 'knn'")
        for key in ("n", "frames", "delta", "batch_size", "train_interval", "memory_size", "workers"):
            if not isinstance(getattr(self, key), int) or getattr(self, key) < 1:
                bad(key, "must be a positive integer")
        if self.k is not None and not (1 <= self.k <= (self.n + 1 if self.quantizer == "op" else 2**self.n)):
            bad("k", f"out of range for N={self.n}")
        if self.oracle == "exhaustive" and self.n > EXHAUSTIVE_MAX_N and self.scenario != "rate-compare":
            bad("oracle", f"exhaustive oracle needs N <= {EXHAUSTIVE_MAX_N}")
        if self.distances is not None and len(self.distances) != self.n:
            bad("distances", f"expected {self.n} entries")
        if self.weights is not None:
            if len(self.weights) != self.n:
                bad("weights", f"expected {self.n} entries")
            if min(self.weights) <= 0:
                bad("weights", "must be positive")
        if self.schedule is not None:
            for ev in self.schedule:
                if not isinstance(ev, dict) or "t" not in ev:
                    bad("schedule", f"event {ev!r} needs a frame index 't'")
                if not (1 <= ev["t"] <= self.frames):
                    bad("schedule", f"event at t={ev['t']} is outside [1, {self.frames}]")
                if "weights" in ev and (len(ev["weights"]) != self.n or min(ev["weights"]) <= 0):
                    bad("schedule", f"event at t={ev['t']} needs {self.n} positive weights")
                if "inactive" in ev and any(not (0 <= i < self.n) for i in ev["inactive"]):
                    bad("schedule", f"event at t={ev['t']} names a device outside [0, {self.n})")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = doc.get("config", doc)

        def where(key):
            for i, line in enumerate(text.splitlines(), 1):
                if f'"{key}"' in line:
                    return f" (line {i})"
            return ""

        names = {f.name for f in dataclasses.fields(cls)}
        for key in doc:
            if key not in names:
                raise ConfigError(f"{key}{where(key)}: unknown config key")
        return cls(**doc).validate(where)

    def agent_config(self) -> AgentConfig:
        train = TrainConfig(
            batch_size=self.batch_size,
            train_interval=self.train_interval,
            memory_size=self.memory_size,
            learning_rate=self.learning_rate,
            input_scale=self.input_scale,
            with_replacement=self.with_replacement,
        )
        return AgentConfig(
            k_mode=self.k_mode,
            k=self.k,
            delta=self.delta,
            quantizer=self.quantizer,
            hidden=tuple(self.hidden),
            train=train,
            workers=self.workers,
        )


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over the last min(window, t) samples."""
    if window < 1:
        raise DomainError("window must be >= 1")
    x = np.asarray(series, float)
    cs = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    start = np.maximum(idx - window, 0)
    return (cs[idx] - cs[start]) / (idx - start)


# --- schedules ----------------------------------------------------------------


def default_schedule(kind: str, n: int, seed: int, frames: int, base_weights) -> list:
    """Event list for the dynamic scenarios; events past the horizon are dropped."""
    base = np.asarray(base_weights, float)
    events = []
    if kind == "alt-weights":
        swapped = np.where(base == base.min(), base.max(), base.min()) if base.min() != base.max() else base
        events = [{"t": 6000, "weights": swapped.tolist()}, {"t": 8000, "weights": base.tolist()}]
    elif kind == "surge":
        w = base.copy()
        w2 = w.copy()
        w2[1] = 2 * base[1]
        w3 = w2.copy()
        w3[0] = 3 * base[0]
        events = [
            {"t": 4000, "weights": w2.tolist()},
            {"t": 6000, "weights": w3.tolist()},
            {"t": 8000, "weights": base.tolist()},
        ]
    elif kind == "onoff":
        gen = rngmod.stream(seed, rngmod.SCHEDULE)
        off_order = [int(i) for i in gen.permutation(n)[:4]]
        inactive: list[int] = []
        for t, dev in zip((6000, 6500, 7000, 7500), off_order):
            inactive = inactive + [dev]
            events.append({"t": t, "inactive": sorted(inactive)})
        for t, dev in zip((8000, 8500, 9000), off_order):
            inactive = [i for i in inactive if i != dev]
            events.append({"t": t, "inactive": sorted(inactive)})
        two = sorted(int(i) for i in gen.choice(n, size=2, replace=False))
        events.append({"t": 9500, "inactive": two})
    return [e for e in events if e["t"] <= frames]


# --- single runs --------------------------------------------------------------


@dataclass
class RunResult:
    rows: list
    config: RunConfig
    dump: list = field(default_factory=list)

    def column(self, name):
        i = CSV_HEADER.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], float)


def _resolve(cfg: RunConfig):
    params = SystemParams(n=cfg.n, weights=cfg.weights)
    if cfg.distances is None:
        topo = make_topology(cfg.n, cfg.seed, params)
    else:
        topo = Topology.from_distances(cfg.distances, params, seed=cfg.seed)
    resolved = dataclasses.replace(
        cfg,
        distances=topo.distances.tolist(),
        weights=params.weights.tolist(),
        schedule=cfg.schedule
        if cfg.schedule is not None
        else default_schedule(cfg.scenario, cfg.n, cfg.seed, cfg.frames, params.weights),
    )
    return resolved, params, topo


def replay_frames(cfg: RunConfig, params: SystemParams, topo: Topology):
    """Yield (t, frame, params) for frames 1..cfg.frames with the schedule applied.

    Weight events replace params; on/off events zero the gains of switched-off
    devices, which drops them from both the agent's and the oracle's problem.
    """
    events = {}
    for ev in cfg.schedule:
        events.setdefault(ev["t"], []).append(ev)
    inactive: list[int] = []
    for t in range(1, cfg.frames + 1):
        for ev in events.get(t, ()):
            if "weights" in ev:
                params = params.with_weights(ev["weights"])
            if "inactive" in ev:
                inactive = list(ev["inactive"])
        frame = sample_frame(topo, t, cfg.seed)
        if inactive:
            h = frame.h.copy()
            h[inactive] = 0.0
            frame = type(frame)(t, h)
        yield t, frame, params


def oracle_series(cfg: RunConfig, start: int = 1) -> np.ndarray:
    """Reference rate per frame (NaN before ``start`` or with oracle 'none').

    The reference never depends on the agent, so it is computed in one pass
    over the replayed channel, batching frames that share weights.
    """
    cfg, params, topo = _resolve(cfg)
    out = np.full(cfg.frames, np.nan)
    if cfg.oracle == "none":
        return out
    segments: dict = {}
    for t, frame, p in replay_frames(cfg, params, topo):
        if t < start:
            continue
        if cfg.oracle == "cd":
            out[t - 1] = coordinate_descent(frame.h, p)[1].q
        else:
            key = tuple(p.weights)
            segments.setdefault(key, (p, [], []))
            segments[key][1].append(t - 1)
            segments[key][2].append(frame.h)
    for p, idx, hs in segments.values():
        out[idx] = exhaustive_rates(np.array(hs), p)
    return out


def run_droo(cfg: RunConfig, agent: DrooAgent | None = None, oracle_from: int = 1, oracle=None):
    """Run the online loop for frames 1..cfg.frames, scoring frames from oracle_from on.

    ``oracle`` may carry a precomputed oracle_series for this config.
    Returns (RunResult, agent) so a caller can keep using the trained agent.
    """
    cfg, params, topo = _resolve(cfg)
    cfg.validate()
    own_agent = agent is None
    if agent is None:
        agent = DrooAgent(params, cfg.agent_config(), seed=cfg.seed)
        if cfg.load_policy:
            agent.net = PolicyNet.load(cfg.load_policy)
    rows, dump = [], []
    try:
        for t, frame, p in replay_frames(cfg, params, topo):
            if p is not agent.params:
                agent.set_params(p)
            res = agent.step(frame)
            rows.append([t, res.q, None, None, res.k_star, res.K_used, res.loss, res.wall_us if cfg.timing else None])
            if cfg.debug_dump:
                dump.append((t, res.alloc.a, res.alloc.tau, res.x_star, frame.h > 0))
    finally:
        if own_agent and cfg.save_policy:
            agent.net.save(cfg.save_policy)
    q_or = oracle_series(cfg, oracle_from) if oracle is None else np.asarray(oracle, float)
    if q_or.shape != (cfg.frames,):
        raise DomainError(f"oracle series has shape {q_or.shape}, expected ({cfg.frames},)")
    for row, qo in zip(rows, q_or):
        if np.isfinite(qo) and row[0] >= oracle_from:
            row[2] = float(qo)
            row[3] = row[1] / qo if qo > 0 else None
    return RunResult(rows, cfg, dump), agent


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(result: RunResult, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in result.rows:
            wr.writerow([_fmt(v) for v in r])


def write_dump(result: RunResult, path):
    n = result.config.n
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(
            ["t", "a"] + [f"tau_{i + 1}" for i in range(n)] + [f"x_{i + 1}" for i in range(n)] + [f"active_{i + 1}" for i in range(n)]
        )
        for t, a, tau, x, act in result.dump:
            wr.writerow([t, _fmt(a)] + [_fmt(v) for v in tau] + [int(v) for v in x] + [int(v) for v in act])


def write_sidecar(cfg: RunConfig, path, extra=None):
    doc = {"config": cfg.to_dict()}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _emit(result: RunResult, out_path, extra=None):
    write_csv(result, out_path)
    write_sidecar(result.config, sidecar_path(out_path), extra)
    if result.config.debug_dump:
        write_dump(result, Path(out_path).with_name(Path(out_path).stem + "_alloc.csv"))


def summarize(result: RunResult, tail: int = 1000) -> dict:
    q_hat = result.column("q_hat")
    out = {"frames": len(result.rows), "mean_q_droo": float(np.mean(result.column("q_droo")))}
    if not np.all(np.isnan(q_hat)):
        out["mean_q_hat"] = float(np.nanmean(q_hat))
        out[f"mean_q_hat_last_{tail}"] = float(np.nanmean(q_hat[-tail:]))
    return out


# --- scenarios ----------------------------------------------------------------


def _variant(out_path, tag):
    p = Path(out_path)
    return p.with_name(f"{p.stem}_{tag}{p.suffix or '.csv'}")


def _sweep_variants(cfg: RunConfig):
    n = cfg.n
    if cfg.scenario == "quantizer-sweep":
        for q in ("op", "knn"):
            for k in cfg.sweep_k:
                if k <= n + 1:
                    yield f"{q}_K{k}", dict(quantizer=q, k=k, k_mode="fixed")
    elif cfg.scenario == "delta-sweep":
        for d in cfg.sweep_delta:
            yield f"delta{d}", dict(k_mode="adaptive", delta=d)
    elif cfg.scenario == "hyper-sweep":
        for m in (128, 512, 1024, 2048):
            yield f"memory{m}", dict(memory_size=m, batch_size=min(cfg.batch_size, m))
        for b in (32, 128, 512, 1024):
            yield f"batch{b}", dict(batch_size=b, memory_size=max(cfg.memory_size, b))
        for d in (5, 10, 20, 50, 100):
            yield f"interval{d}", dict(train_interval=d)
        for lr in (0.1, 0.01, 0.001, 0.0001):
            yield f"lr{lr:g}", dict(learning_rate=lr)


def run_rate_compare(cfg: RunConfig, out_path) -> dict:
    """Train on train_frames, then score eval_frames against the reference policy."""
    summary = {}
    for n in cfg.rate_compare_n:
        oracle = "exhaustive" if n <= 10 else "cd"
        sub = dataclasses.replace(
            cfg,
            scenario="baseline",
            n=n,
            frames=cfg.train_frames + cfg.eval_frames,
            oracle=oracle,
            distances=None if cfg.n != n else cfg.distances,
            weights=None if cfg.n != n else cfg.weights,
            k=None,
            schedule=[],
        )
        result, agent = run_droo(sub, oracle_from=cfg.train_frames + 1)
        agent.close()
        result.rows = result.rows[cfg.train_frames :]
        params = SystemParams(n=n, weights=result.config.weights)
        topo = Topology.from_distances(result.config.distances, params)
        loc, edge = [], []
        for t in range(cfg.train_frames + 1, cfg.train_frames + cfg.eval_frames + 1):
            h = sample_frame(topo, t, cfg.seed).h
            loc.append(all_local(h, params).q)
            edge.append(all_edge(h, params).q)
        stats = {
            "oracle": oracle,
            "mean_q_droo": float(np.mean(result.column("q_droo"))),
            "mean_q_oracle": float(np.mean(result.column("q_oracle"))),
            "mean_q_hat": float(np.nanmean(result.column("q_hat"))),
            "median_q_hat": float(np.nanmedian(result.column("q_hat"))),
            "mean_q_local": float(np.mean(loc)),
            "mean_q_edge": float(np.mean(edge)),
        }
        summary[str(n)] = stats
        _emit(result, _variant(out_path, f"N{n}"), {"summary": stats})
    return summary


def run_scenario(cfg: RunConfig, out_path) -> int:
    """Run a scenario and write its CSV(s) and JSON sidecar(s); returns an exit status."""
    cfg.validate()
    if cfg.scenario == "rate-compare":
        summary = run_rate_compare(cfg, out_path)
        write_sidecar(cfg, sidecar_path(out_path), {"summary": summary})
        return 0
    variants = list(_sweep_variants(cfg))
    if not variants:
        result, agent = run_droo(cfg)
        agent.close()
        _emit(result, out_path, {"summary": summarize(result)})
        return 0
    summary = {}
    for tag, changes in variants:
        sub = dataclasses.replace(cfg, scenario="baseline", **changes)
        result, agent = run_droo(sub)
        agent.close()
        summary[tag] = summarize(result)
        _emit(result, _variant(out_path, tag), {"summary": summary[tag]})
    write_sidecar(cfg, sidecar_path(out_path), {"summary": summary})
    return 0
