"""Spike-train distances, the class decision rule and moving-average trackers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .neuron import ConfigurationError

MISS = -1


@dataclass(frozen=True)
class VrdParams:
    tau_c: float = 10.0  # ms

    def __post_init__(self):
        if self.tau_c <= 0:
            raise ValueError("tau_c must be positive")


def _pair_sum(a: np.ndarray, b: np.ndarray, tau: float) -> float:
    if a.size == 0 or b.size == 0:
        return 0.0
    return float(np.exp(-np.abs(a[:, None] - b[None, :]) / tau).sum())


def vrd(a, b, params: VrdParams = VrdParams()) -> float:
    """van Rossum distance between two spike trains (times in ms).

    Closed form of (1/tau_c) int (a~ - b~)^2 dt for exponentially filtered
    trains: each pair of spikes contributes (tau_c / 2) exp(-|dt| / tau_c).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tau = params.tau_c
    d = 0.5 * (_pair_sum(a, a, tau) + _pair_sum(b, b, tau) - 2.0 * _pair_sum(a, b, tau))
    # rounding can leave tiny negatives for identical trains
    return max(d, 0.0)


def vrd_grid(a, b, params: VrdParams = VrdParams(), step: float = 0.01, horizon: Optional[float] = None) -> float:
    """Numerical integration of the filtered-trace definition (test oracle)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tau = params.tau_c
    both = np.concatenate([a, b])
    if both.size == 0:
        return 0.0
    end = both.max() + (horizon if horizon is not None else 30.0 * tau)
    t = np.arange(0.0, end, step)

    def filt(train):
        out = np.zeros_like(t)
        for tf in train:
            m = t >= tf
            out[m] += np.exp(-(t[m] - tf) / tau)
        return out

    diff = filt(a) - filt(b)
    return float(np.trapezoid(diff ** 2, t) / tau) if hasattr(np, "trapezoid") else float(np.trapz(diff ** 2, t) / tau)


def vrd_spatio(A: Sequence, B: Sequence, params: VrdParams = VrdParams()) -> float:
    """Distance between spatio-temporal patterns: summed over output neurons."""
    if len(A) != len(B):
        raise ConfigurationError(f"patterns differ in neuron count ({len(A)} vs {len(B)})")
    return float(sum(vrd(a, b, params) for a, b in zip(A, B)))


def class_distances(actual: Sequence, class_targets: Sequence, params: VrdParams = VrdParams()) -> np.ndarray:
    return np.array([vrd_spatio(actual, tgt, params) for tgt in class_targets])


def classify(actual: Sequence, class_targets: Sequence, params: VrdParams = VrdParams()) -> int:
    """Index of the nearest class target, or ``MISS`` if the minimum is shared."""
    if len(class_targets) < 1:
        raise ValueError("need at least one class")
    dist = class_distances(actual, class_targets, params)
    return decide(dist)


def decide(distances) -> int:
    distances = np.asarray(distances, dtype=float)
    best = distances.min()
    winners = np.flatnonzero(distances == best)
    return int(winners[0]) if winners.size == 1 else MISS


def time_shift(actual: Sequence, targets: Sequence) -> Optional[float]:
    """Mean |t_o - nearest target| when every output fired exactly one spike.

    Returns None otherwise (no update of the time-shift average).
    """
    shifts = []
    for a, tgt in zip(actual, targets):
        a = np.asarray(a, dtype=float)
        tgt = np.asarray(tgt, dtype=float)
        if a.size != 1 or tgt.size == 0:
            return None
        shifts.append(np.min(np.abs(tgt - a[0])))
    return float(np.mean(shifts)) if shifts else None


def smoothing_factor(p: int) -> float:
    """lambda = 2 / (1 + 20 p): an averaging window of 20 p episodes."""
    return 2.0 / (1.0 + 20.0 * p)


@dataclass
class PerformanceTracker:
    """Exponential moving averages of performance (%), distance and time shift.

    Performance starts at 0; the distance and time-shift averages are seeded
    with their first observation.
    """

    lam: float
    p_tilde: float = 0.0
    d_tilde: Optional[float] = None
    dt_shift: Optional[float] = None
    history: list = field(default_factory=list)

    @classmethod
    def for_patterns(cls, p: int) -> "PerformanceTracker":
        return cls(lam=smoothing_factor(p))

    def update(self, correct: bool, vrd_value: float, shift: Optional[float] = None) -> "PerformanceTracker":
        lam = self.lam
        self.p_tilde = (1.0 - lam) * self.p_tilde + lam * (100.0 if correct else 0.0)
        self.d_tilde = vrd_value if self.d_tilde is None else (1.0 - lam) * self.d_tilde + lam * vrd_value
        if shift is not None:
            self.dt_shift = shift if self.dt_shift is None else (1.0 - lam) * self.dt_shift + lam * shift
        self.history.append((self.p_tilde, self.d_tilde, self.dt_shift))
        return self


def update_tracker(tracker: PerformanceTracker, correct: bool, vrd_value: float,
                   time_shift_ms: Optional[float] = None) -> PerformanceTracker:
    return tracker.update(correct, vrd_value, time_shift_ms)


def convergence_episode(p_history: Sequence[float]) -> int:
    """First (1-based) episode n with p(n) > 0.99 p(N); 0 when p(N) == 0."""
    p = np.asarray(p_history, dtype=float)
    if p.size == 0 or p[-1] == 0:
        return 0
    hits = np.flatnonzero(p > 0.99 * p[-1])
    return int(hits[0]) + 1


class TargetBank:
    """Precomputed class targets for fast repeated nearest-class decisions.

    Gives the same distances as :func:`class_distances`.
    """

    def __init__(self, class_targets: Sequence, params: VrdParams = VrdParams()):
        self.tau = params.tau_c
        self.c = len(class_targets)
        self.n_o = len(class_targets[0])
        self.self_energy = np.zeros(self.c)
        self.times, self.owner = [], []
        for o in range(self.n_o):
            trains = [np.asarray(cls[o], dtype=float) for cls in class_targets]
            self.times.append(np.concatenate(trains) if trains else np.zeros(0))
            self.owner.append(np.repeat(np.arange(self.c), [t.size for t in trains]))
            self.self_energy += [_pair_sum(t, t, self.tau) for t in trains]

    def distances(self, actual: Sequence) -> np.ndarray:
        if len(actual) != self.n_o:
            raise ConfigurationError(f"expected {self.n_o} output trains, got {len(actual)}")
        d = 0.5 * self.self_energy.copy()
        for o, a in enumerate(actual):
            a = np.asarray(a, dtype=float)
            if a.size == 0:
                continue
            d += 0.5 * _pair_sum(a, a, self.tau)
            if self.times[o].size:
                cross = np.exp(-np.abs(a[:, None] - self.times[o][None, :]) / self.tau).sum(axis=0)
                d -= np.bincount(self.owner[o], weights=cross, minlength=self.c)
        return np.maximum(d, 0.0)
