"""Seeded experiment runs, aggregation and CSV/manifest emission."""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..learning import LearningRates, episode_update
from ..metrics import MISS, PerformanceTracker, TargetBank, convergence_episode, decide, time_shift
from ..network import LayeredNetwork, NetworkConfig, initialize, simulate_episode
from ..patterns import (
    PatternSet, fixed_target_set, gen_mapping_set, gen_synthetic_dataset, gen_xor_set, jitter_raster,
)
from .config import ExperimentConfig


@dataclass
class RunResult:
    run: int
    seed: int
    p_tilde: np.ndarray
    d_tilde: np.ndarray
    dt_shift: np.ndarray  # NaN until the first qualifying episode
    weights: dict
    convergence: int
    wall_clock: float
    complete: bool = True
    test_accuracy: Optional[float] = None
    patterns: Optional[PatternSet] = field(default=None, repr=False)

    @property
    def episodes(self) -> int:
        return len(self.p_tilde)

    def final(self, name: str) -> float:
        arr = getattr(self, name)
        return float(arr[-1]) if len(arr) else float("nan")


@dataclass
class ConditionResult:
    label: str
    config: ExperimentConfig
    runs: list

    def aggregate(self) -> dict:
        def stats(values):
            v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
            if v.size == 0:
                return float("nan"), float("nan")
            return float(v.mean()), float(v.std())

        out = {"condition": self.label, "runs": len(self.runs)}
        for key, values in (
            ("p_tilde", [r.final("p_tilde") for r in self.runs]),
            ("d_tilde", [r.final("d_tilde") for r in self.runs]),
            ("dt_shift", [r.final("dt_shift") for r in self.runs]),
            ("convergence", [r.convergence for r in self.runs]),
            ("test_accuracy", [r.test_accuracy for r in self.runs]),
        ):
            out[f"{key}_mean"], out[f"{key}_std"] = stats(values)
        return out


# ---------------------------------------------------------------------------
# One run


def network_config(cfg: ExperimentConfig) -> NetworkConfig:
    bio = cfg.rule == "bio"
    return NetworkConfig(
        n_i=cfg.n_i, n_h=cfg.hidden, n_o=cfg.n_o, variant=cfg.variant,
        positive_outputs=True if bio else None, equal_output_init=True if bio else None,
    )


def build_patterns(cfg: ExperimentConfig, rng: np.random.Generator):
    """Training set (and test set for the generalization task)."""
    if cfg.experiment == "xor":
        return gen_xor_set(rng), None
    if cfg.experiment == "generalization":
        return gen_synthetic_dataset(cfg.sigma, cfg.n_s, rng, c=cfg.c, n_train=cfg.n_train,
                                     n_test=cfg.n_test, n_i=cfg.n_i, n_o=cfg.n_o)
    if cfg.targets is not None:
        return fixed_target_set(cfg.targets, cfg.n_i, rng), None
    return gen_mapping_set(cfg.patterns, cfg.classes, cfg.n_o, cfg.n_s, rng, n_i=cfg.n_i), None


def episode_jitter(cfg: ExperimentConfig) -> float:
    # the generalization set is jittered once, at generation time
    return 0.0 if cfg.experiment == "generalization" else cfg.sigma


def evaluate(net: LayeredNetwork, patterns: PatternSet, rng: np.random.Generator) -> float:
    """Fraction (%) of patterns classified correctly, without learning."""
    bank = TargetBank(patterns.class_targets)
    rasters = patterns.rasters()
    hits = 0
    for k in range(patterns.p):
        rec = simulate_episode(net, rasters[k], rng)
        hits += decide(bank.distances(rec.output_trains)) == patterns.labels[k]
    return 100.0 * hits / patterns.p


def run_single(cfg: ExperimentConfig, r: int, keep_patterns: bool = True) -> RunResult:
    """One independent run with seed ``base_seed + r``.

    The run's generator is consumed in this order: pattern generation,
    network initialization, then per episode the pattern choice, jitter,
    hidden sampling and output sampling.
    """
    seed = cfg.base_seed + r
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    train, test = build_patterns(cfg, rng)
    net = initialize(network_config(cfg), rng)
    rates = LearningRates.for_network(cfg.n_i, cfg.hidden, cfg.n_o, train.n_s)
    bank = TargetBank(train.class_targets)
    tracker = PerformanceTracker.for_patterns(train.p)
    sigma = episode_jitter(cfg)
    clean = None if sigma > 0 else train.rasters()
    n_ep = cfg.total_episodes
    hist = np.full((n_ep, 3), np.nan)
    done = 0
    complete = True
    try:
        for ep in range(n_ep):
            k = int(rng.integers(train.p))
            inputs = clean[k] if clean is not None else jitter_raster(train.inputs[k], sigma, rng, train.T, train.dt)
            rec = simulate_episode(net, inputs, rng)
            targets = train.targets_for(k)
            actual = rec.output_trains
            dist = bank.distances(actual)
            choice = decide(dist)
            correct = choice != MISS and choice == train.labels[k]
            tracker.update(correct, float(dist[train.labels[k]]), time_shift(actual, targets) if correct else None)
            episode_update(net, rec, targets, rates, rule=cfg.rule, gain=cfg.bio_gain)
            hist[ep] = [tracker.p_tilde, tracker.d_tilde,
                        np.nan if tracker.dt_shift is None else tracker.dt_shift]
            done = ep + 1
    except KeyboardInterrupt:
        complete = False
    hist = hist[:done]
    test_acc = evaluate(net, test, rng) if (test is not None and complete) else None
    return RunResult(
        run=r, seed=seed, p_tilde=hist[:, 0], d_tilde=hist[:, 1], dt_shift=hist[:, 2],
        weights=net.to_dict(), convergence=convergence_episode(hist[:, 0]),
        wall_clock=time.perf_counter() - start, complete=complete, test_accuracy=test_acc,
        patterns=train if keep_patterns else None,
    )


# ---------------------------------------------------------------------------
# Whole experiment


def _job(args):
    cfg, r = args
    return run_single(cfg, r)


def run(cfg: ExperimentConfig, workers: int = 1, progress=None) -> list:
    """All conditions of the sweep, each over ``cfg.runs`` runs.

    Returns a list of :class:`ConditionResult`. On interrupt the runs that
    finished (and the interrupted one, truncated) are returned.
    """
    conditions = cfg.conditions()
    jobs = [(label, c, r) for label, c in conditions for r in range(cfg.runs)]
    results = {label: [] for label, _ in conditions}
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outs = pool.map(_job, [(c, r) for _, c, r in jobs])
                for (label, _, _), res in zip(jobs, outs):
                    results[label].append(res)
                    if progress:
                        progress(label, res)
        else:
            for label, c, r in jobs:
                res = run_single(c, r)
                results[label].append(res)
                if progress:
                    progress(label, res)
                if not res.complete:
                    raise KeyboardInterrupt
    except KeyboardInterrupt:
        pass
    return [ConditionResult(label, c, results[label]) for label, c in conditions if results[label]]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if np.isnan(x) else repr(x)
    return str(x)


def emit(results: list, cfg: ExperimentConfig, out_dir, save_patterns: bool = True) -> Path:
    """Write curve CSVs, a summary CSV and a manifest under ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    echo = ("n_i", "n_h", "n_o", "p", "c", "n_s", "sigma", "rule", "variant", "hidden_ratio")
    rows = []
    seeds = {}
    for cond in results:
        cdir = out / cond.label
        cdir.mkdir(exist_ok=True)
        seeds[cond.label] = [r.seed for r in cond.runs]
        for res in cond.runs:
            with open(cdir / f"run_{res.run:03d}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["episode", "p_tilde", "d_tilde", "dt_shift"])
                for ep in range(res.episodes):
                    w.writerow([ep + 1, _fmt(float(res.p_tilde[ep])), _fmt(float(res.d_tilde[ep])),
                                _fmt(float(res.dt_shift[ep]))])
            if save_patterns and res.patterns is not None:
                res.patterns.save(cdir / f"patterns_{res.run:03d}.json")
            (cdir / f"weights_{res.run:03d}.json").write_text(json.dumps(res.weights))
        row = {k: getattr(cond.config, k) for k in echo}
        row["n_h"] = cond.config.hidden
        row["patterns"] = cond.config.patterns
        row["c"] = cond.config.classes
        row["episodes"] = cond.config.total_episodes
        row.update(cond.aggregate())
        row["complete"] = all(r.complete for r in cond.runs) and len(cond.runs) == cfg.runs
        rows.append(row)
    if rows:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for row in rows:
                w.writerow({k: _fmt(v) for k, v in row.items()})
    manifest = {
        "format": "mlspike.manifest/1",
        "config": cfg.to_dict(),
        "seeds": seeds,
        "conditions": [c.label for c in results],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out
