"""Input patterns, jitter noise and class target spike trains.

A pattern is a list of spike trains (one float array of ms times per input
neuron). Times are aligned to the simulation grid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .metrics import VrdParams, vrd
from .neuron import ConfigurationError

MAX_REJECTIONS = 1_000_000
TARGET_START = 40.0  # ms
TARGET_MIN_ISI = 10.0  # ms


class InfeasibleTargetsError(RuntimeError):
    """Target constraints could not be met within the rejection budget."""


@dataclass
class PatternSet:
    inputs: list  # p patterns, each n_i trains
    labels: np.ndarray  # class index per pattern
    class_targets: list  # c classes, each n_o trains
    n_s: int
    T: float = 500.0
    dt: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.inputs) != len(self.labels):
            raise ConfigurationError("one label per input pattern required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_targets)):
            raise ConfigurationError("label without a class target")

    @property
    def p(self) -> int:
        return len(self.inputs)

    @property
    def c(self) -> int:
        return len(self.class_targets)

    @property
    def n_o(self) -> int:
        return len(self.class_targets[0])

    def targets_for(self, k: int) -> list:
        return self.class_targets[self.labels[k]]

    def rasters(self) -> np.ndarray:
        """All inputs as a (p, n_i, K) spike-count array."""
        steps = int(round(self.T / self.dt))
        out = np.zeros((self.p, len(self.inputs[0]), steps))
        for k, pat in enumerate(self.inputs):
            for i, train in enumerate(pat):
                idx = np.rint(np.asarray(train) / self.dt).astype(int)
                np.add.at(out[k, i], idx, 1.0)
        return out

    def to_dict(self) -> dict:
        trains = lambda group: [[list(map(float, t)) for t in trs] for trs in group]  # noqa: E731
        return {
            "format": "mlspike.patterns/1",
            "T": self.T,
            "dt": self.dt,
            "n_s": self.n_s,
            "labels": self.labels.tolist(),
            "inputs": trains(self.inputs),
            "class_targets": trains(self.class_targets),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PatternSet":
        if data.get("format") != "mlspike.patterns/1":
            raise ConfigurationError("not a pattern-set document")
        arr = lambda group: [[np.asarray(t, dtype=float) for t in trs] for trs in group]  # noqa: E731
        return cls(arr(data["inputs"]), data["labels"], arr(data["class_targets"]),
                   int(data["n_s"]), float(data["T"]), float(data["dt"]), data.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PatternSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Inputs


def gen_poisson_pattern(n: int, rate: float = 6.0, T: float = 500.0, tau_r: float = 10.0,
                        rng: Optional[np.random.Generator] = None, dt: float = 1.0) -> list:
    """``n`` independent Poisson trains with relative refractoriness.

    The rate after a spike recovers as ``rate * (1 - exp(-(t - t_last) / tau_r))``.
    One uniform is drawn per step and neuron, step-major.
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    rng = np.random.default_rng() if rng is None else rng
    steps = int(round(T / dt))
    u = rng.random((steps, n))
    base = rate * dt / 1000.0
    last = np.full(n, -np.inf)
    spikes = np.zeros((steps, n), dtype=bool)
    for k in range(steps):
        t = k * dt
        p = base * (1.0 - np.exp(-(t - last) / tau_r)) if tau_r > 0 else np.full(n, base)
        s = u[k] < p
        spikes[k] = s
        last[s] = t
    return [np.flatnonzero(spikes[:, i]) * dt for i in range(n)]


def gen_poisson_input(rate: float = 6.0, T: float = 500.0, tau_r: float = 10.0,
                      rng: Optional[np.random.Generator] = None, dt: float = 1.0) -> np.ndarray:
    """Single refractory Poisson train."""
    return gen_poisson_pattern(1, rate, T, tau_r, rng, dt)[0]


def _jitter_flat(pattern: Sequence, sigma: float, rng: np.random.Generator, T: float, dt: float, drop: bool):
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    trains = [np.asarray(t, dtype=float) for t in pattern]
    counts = np.array([t.size for t in trains], dtype=int)
    flat = np.concatenate(trains) if trains else np.zeros(0)
    owner = np.repeat(np.arange(len(trains)), counts)
    if sigma == 0:
        return flat, owner
    moved = np.rint((flat + rng.normal(0.0, sigma, flat.size)) / dt) * dt
    if drop:
        keep = (moved >= 0) & (moved < T)
        moved, owner = moved[keep], owner[keep]
    else:
        moved = np.clip(moved, 0.0, T - dt)
    return moved, owner


def jitter(pattern: Sequence, sigma: float, rng: np.random.Generator, T: float = 500.0,
           dt: float = 1.0, drop: bool = False) -> list:
    """Gaussian jitter of every spike, rounded to the grid.

    Spikes pushed outside [0, T) are clipped to the edge, or removed when
    ``drop`` is set. Returns a new pattern.
    """
    moved, owner = _jitter_flat(pattern, sigma, rng, T, dt, drop)
    order = np.lexsort((moved, owner))
    moved, owner = moved[order], owner[order]
    return np.split(moved, np.searchsorted(owner, np.arange(1, len(pattern))))


def jitter_raster(pattern: Sequence, sigma: float, rng: np.random.Generator, T: float = 500.0,
                  dt: float = 1.0, drop: bool = False) -> np.ndarray:
    """Raster of ``jitter(pattern, ...)`` for the same generator state, without building trains."""
    moved, owner = _jitter_flat(pattern, sigma, rng, T, dt, drop)
    steps = int(round(T / dt))
    idx = owner * steps + np.rint(moved / dt).astype(int)
    return np.bincount(idx, minlength=len(pattern) * steps).astype(float).reshape(len(pattern), steps)


# ---------------------------------------------------------------------------
# Targets


def _target_train(n_s: int, T: float, dt: float, rng: np.random.Generator) -> Optional[np.ndarray]:
    grid = np.arange(TARGET_START, T, dt)
    if n_s > grid.size:
        return None
    t = np.sort(rng.choice(grid, size=n_s, replace=False))
    if n_s > 1 and np.min(np.diff(t)) < TARGET_MIN_ISI:
        return None
    return t


def max_single_spike_classes(T: float = 500.0, dt: float = 1.0, params: VrdParams = VrdParams()) -> int:
    """Packing bound for n_s = 1: classes need gaps above tau_c ln 2 on the grid."""
    slots = np.arange(TARGET_START, T, dt).size
    gap = int(np.floor(params.tau_c * np.log(2.0) / dt)) + 1
    return (slots - 1) // gap + 1


def gen_class_targets(c: int, n_o: int, n_s: int, T: float = 500.0, rng: Optional[np.random.Generator] = None,
                      dt: float = 1.0, params: VrdParams = VrdParams(),
                      max_rejections: int = MAX_REJECTIONS) -> list:
    """Random targets for ``c`` classes, each ``n_o`` trains of ``n_s`` spikes.

    Classes are drawn one at a time; a candidate is rejected when any output
    train violates the spacing rule or lies within distance ``n_s / 2`` of the
    same output's train in an earlier class.
    """
    if c < 1 or n_o < 1 or n_s < 1:
        raise ValueError("c, n_o and n_s must be positive")
    if n_s == 1 and c > max_single_spike_classes(T, dt, params):
        raise InfeasibleTargetsError(
            f"{c} single-spike classes cannot be separated; at most {max_single_spike_classes(T, dt, params)} fit")
    rng = np.random.default_rng() if rng is None else rng
    d_min = n_s / 2.0
    targets = []
    rejections = 0
    while len(targets) < c:
        cand = []
        for o in range(n_o):
            t = _target_train(n_s, T, dt, rng)
            if t is None or any(vrd(t, prev[o], params) <= d_min for prev in targets):
                cand = None
                break
            cand.append(t)
        if cand is None:
            rejections += 1
            if rejections >= max_rejections:
                raise InfeasibleTargetsError(
                    f"could not place {c} classes (n_o={n_o}, n_s={n_s}) after {rejections} rejections")
            continue
        targets.append(cand)
    return targets


def check_targets(class_targets: Sequence, n_s: int, T: float = 500.0, params: VrdParams = VrdParams()) -> bool:
    """True when the target set satisfies timing, spacing and separation rules."""
    for cls in class_targets:
        for t in cls:
            t = np.asarray(t)
            if t.size != n_s or t.min() < TARGET_START or t.max() >= T:
                return False
            if t.size > 1 and np.min(np.diff(t)) < TARGET_MIN_ISI:
                return False
    for a in range(len(class_targets)):
        for b in range(a):
            for o in range(len(class_targets[a])):
                if vrd(class_targets[a][o], class_targets[b][o], params) <= n_s / 2.0:
                    return False
    return True


# ---------------------------------------------------------------------------
# Task builders


def gen_mapping_set(p: int, c: int, n_o: int = 1, n_s: int = 1, rng: Optional[np.random.Generator] = None,
                    n_i: int = 100, T: float = 500.0, dt: float = 1.0, rate: float = 6.0) -> PatternSet:
    """``p`` random inputs split evenly (round robin) over ``c`` classes."""
    rng = np.random.default_rng() if rng is None else rng
    if c > p:
        raise ConfigurationError("more classes than patterns")
    inputs = [gen_poisson_pattern(n_i, rate, T, rng=rng, dt=dt) for _ in range(p)]
    targets = gen_class_targets(c, n_o, n_s, T, rng, dt)
    labels = np.arange(p) % c
    return PatternSet(inputs, labels, targets, n_s, T, dt)


def fixed_target_set(target_times: Sequence, n_i: int = 100, rng: Optional[np.random.Generator] = None,
                     T: float = 500.0, dt: float = 1.0, rate: float = 6.0) -> PatternSet:
    """One input pattern mapped to given targets (a list of times per output)."""
    rng = np.random.default_rng() if rng is None else rng
    trains = [np.asarray(t, dtype=float) for t in target_times]
    n_s = max(t.size for t in trains)
    return PatternSet([gen_poisson_pattern(n_i, rate, T, rng=rng, dt=dt)], [0], [trains], n_s, T, dt)


XOR_TIMES = {0: 334.0, 1: 167.0}


def gen_xor_set(rng: Optional[np.random.Generator] = None, n_group: int = 50,
                T: float = 500.0, dt: float = 1.0, rate: float = 6.0) -> PatternSet:
    """XOR truth table: bit b is the same ``n_group`` trains in either group.

    Class 0 ("false") fires late, class 1 ("true") early.
    """
    rng = np.random.default_rng() if rng is None else rng
    code = {bit: gen_poisson_pattern(n_group, rate, T, rng=rng, dt=dt) for bit in (0, 1)}
    inputs, labels = [], []
    for a in (0, 1):
        for b in (0, 1):
            inputs.append([t.copy() for t in code[a]] + [t.copy() for t in code[b]])
            labels.append(a ^ b)
    targets = [[np.array([XOR_TIMES[0]])], [np.array([XOR_TIMES[1]])]]
    return PatternSet(inputs, labels, targets, 1, T, dt, meta={"bits": [[0, 0], [0, 1], [1, 0], [1, 1]]})


def gen_synthetic_dataset(sigma: float, n_s: int = 1, rng: Optional[np.random.Generator] = None,
                          c: int = 10, n_train: int = 15, n_test: int = 25, n_i: int = 100,
                          n_o: int = 1, T: float = 500.0, dt: float = 1.0, rate: float = 6.0):
    """Jittered copies of one reference pattern per class.

    Returns ``(train, test)`` pattern sets sharing the class targets.
    """
    rng = np.random.default_rng() if rng is None else rng
    refs = [gen_poisson_pattern(n_i, rate, T, rng=rng, dt=dt) for _ in range(c)]
    targets = gen_class_targets(c, n_o, n_s, T, rng, dt)

    def copies(n):
        pats, labels = [], []
        for k, ref in enumerate(refs):
            for _ in range(n):
                pats.append(jitter(ref, sigma, rng, T, dt))
                labels.append(k)
        return PatternSet(pats, labels, targets, n_s, T, dt, meta={"sigma": sigma})

    return copies(n_train), copies(n_test)
