"""Command-line entry point.

Examples::

    droo --scenario baseline --n 10 --frames 10000 --k 10 --out runs/base.csv
    droo --config runs/base.json --out runs/replay.csv
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from droo.errors import DomainError
from droo.harness import ORACLES, SCENARIOS, ConfigError, RunConfig, run_scenario, sidecar_path

# CLI flag -> RunConfig field
FLAG_FIELDS = {
    "scenario": "scenario",
    "n": "n",
    "frames": "frames",
    "seed": "seed",
    "k_mode": "k_mode",
    "k": "k",
    "delta": "delta",
    "quantizer": "quantizer",
    "oracle": "oracle",
    "workers": "workers",
    "train_frames": "train_frames",
    "eval_frames": "eval_frames",
    "save_policy": "save_policy",
    "load_policy": "load_policy",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="droo", description="Run online offloading experiments.")
    ap.add_argument("--scenario", choices=SCENARIOS)
    ap.add_argument("--n", type=int, help="number of wireless devices")
    ap.add_argument("--frames", type=int, help="number of time frames M")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--k-mode", dest="k_mode", choices=["fixed", "adaptive"])
    ap.add_argument("--k", type=int, help="candidates per frame in fixed mode (default N)")
    ap.add_argument("--delta", type=int, help="adaptive-K update interval")
    ap.add_argument("--quantizer", choices=["op", "knn"])
    ap.add_argument("--oracle", choices=ORACLES)
    ap.add_argument("--workers", type=int, help="threads for candidate evaluation")
    ap.add_argument("--train-frames", dest="train_frames", type=int)
    ap.add_argument("--eval-frames", dest="eval_frames", type=int)
    ap.add_argument("--config", type=Path, help="JSON config or a previous run's sidecar")
    ap.add_argument("--topology", type=Path, help="topology JSON (distances, optional weights)")
    ap.add_argument("--save-policy", dest="save_policy", help="write the trained network snapshot here")
    ap.add_argument("--load-policy", dest="load_policy", help="start from a saved network snapshot")
    ap.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                    help="leave wall_us empty so reruns are byte-identical")
    ap.add_argument("--debug-dump", dest="debug_dump", action="store_true", default=None,
                    help="also write per-frame a, tau, x and activity")
    ap.add_argument("--out", type=Path, required=True, help="CSV output path")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config.read_text()) if args.config else RunConfig()
    changes = {field: getattr(args, flag) for flag, field in FLAG_FIELDS.items() if getattr(args, flag) is not None}
    for flag in ("timing", "debug_dump"):
        if getattr(args, flag) is not None:
            changes[flag] = getattr(args, flag)
    if args.topology:
        doc = json.loads(args.topology.read_text())
        changes["distances"] = doc["distances"]
        if doc.get("weights") is not None:
            changes["weights"] = doc["weights"]
        changes.setdefault("n", len(doc["distances"]))
    if "n" in changes and changes["n"] != cfg.n and args.config:
        # a different N invalidates per-device fields taken from the file
        changes.setdefault("distances", None)
        changes.setdefault("weights", None)
        changes.setdefault("schedule", None)
    if "frames" in changes or "seed" in changes or "scenario" in changes:
        changes.setdefault("schedule", None)
    if "seed" in changes:
        changes.setdefault("distances", None)
    return dataclasses.replace(cfg, **changes).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        status = run_scenario(cfg, args.out)
    except (ConfigError, DomainError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 3
    side = sidecar_path(args.out)
    if side.exists():
        summary = json.loads(side.read_text()).get("summary")
        if summary:
            print(json.dumps(summary, indent=2))
    return status


if __name__ == "__main__":
    sys.exit(main())
