"""``mlspike run <experiment> [options]``"""
from __future__ import annotations

import argparse
import logging
import sys

from ..neuron import ConfigurationError
from ..patterns import InfeasibleTargetsError
from .config import EXPERIMENTS, load_config, preset
from .runner import emit, run

log = logging.getLogger("mlspike")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlspike", description="Run spike-timing learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment preset")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--config", help="YAML/JSON file overriding preset fields (a manifest also works)")
    r.add_argument("--seed", type=int, dest="base_seed")
    r.add_argument("--runs", type=int)
    r.add_argument("--episodes", type=int)
    r.add_argument("--scale", type=float)
    r.add_argument("--out", default="results")
    r.add_argument("--rule", choices=["backprop", "bio", "bio-backprop"])
    r.add_argument("--variant", choices=["free", "fixed", "single", "fixed-hidden", "single-layer"])
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--no-sweep", action="store_true", help="run only the base condition")
    r.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        overrides = load_config(args.config) if args.config else {}
        if overrides.get("experiment", args.experiment) != args.experiment:
            raise ConfigurationError(f"config is for {overrides['experiment']!r}, not {args.experiment!r}")
        overrides.pop("experiment", None)
        for key in ("base_seed", "runs", "episodes", "scale", "rule", "variant"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
                if key in ("rule", "variant"):
                    overrides.setdefault("sweep", dict(preset(args.experiment).sweep))
                    overrides["sweep"] = {k: v for k, v in overrides["sweep"].items() if k != key}
        if args.no_sweep:
            overrides["sweep"] = {}
        cfg = preset(args.experiment, **overrides)
    except (ConfigurationError, TypeError, ValueError) as exc:
        print(f"mlspike: configuration error: {exc}", file=sys.stderr)
        return 2

    def progress(label, res):
        log.info("%s run %d: p=%.1f%% D=%.3f (%.1fs)", label, res.run, res.final("p_tilde"),
                 res.final("d_tilde"), res.wall_clock)

    interrupted = False
    try:
        results = run(cfg, workers=args.workers, progress=progress)
    except InfeasibleTargetsError as exc:
        print(f"mlspike: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        results, interrupted = [], True
    interrupted = interrupted or any(not r.complete for c in results for r in c.runs) \
        or sum(len(c.runs) for c in results) < cfg.runs * len(cfg.conditions())
    try:
        out = emit(results, cfg, args.out)
    except OSError as exc:
        print(f"mlspike: {exc}", file=sys.stderr)
        return 4
    log.info("wrote %s", out)
    return 130 if interrupted else 0
