"""PSP / reset kernels and exact exponential traces.

Every convolution of a spike train with a kernel is carried by one or two
exponential states that are propagated between grid points with the exact
decay factor ``exp(-dt / tau)``. With spikes restricted to grid times this
reproduces the kernel sum exactly (up to float rounding).

Timing convention: an impulse delivered at step ``t`` is visible in the
trace value from step ``t + 1`` onwards. For the PSP kernel this changes
nothing (``eps(0) == 0``); for the reset kernel it means the reset acts from
the step after the spike.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine


@dataclass(frozen=True)
class KernelParams:
    eps0: float = 4.0  # mV
    kappa0: float = -15.0  # mV
    tau_m: float = 10.0  # ms
    tau_s: float = 5.0  # ms

    def __post_init__(self):
        if not (self.tau_m > self.tau_s > 0):
            raise ValueError("require tau_m > tau_s > 0")
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if self.kappa0 >= 0:
            raise ValueError("kappa0 must be negative")

    def decays(self, dt: float) -> tuple[float, float]:
        """Per-step decay factors of the membrane and synaptic exponentials."""
        return float(np.exp(-dt / self.tau_m)), float(np.exp(-dt / self.tau_s))


DEFAULT_KERNELS = KernelParams()


def psp_kernel(s, params: KernelParams = DEFAULT_KERNELS):
    """eps(s) = eps0 (exp(-s/tau_m) - exp(-s/tau_s)) for s >= 0, else 0."""
    s = np.asarray(s, dtype=float)
    pos = np.maximum(s, 0.0)
    val = params.eps0 * (np.exp(-pos / params.tau_m) - np.exp(-pos / params.tau_s))
    out = np.where(s >= 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


def reset_kernel(s, params: KernelParams = DEFAULT_KERNELS):
    """kappa(s) = kappa0 exp(-s/tau_m) for s >= 0, else 0."""
    s = np.asarray(s, dtype=float)
    pos = np.maximum(s, 0.0)
    out = np.where(s >= 0, params.kappa0 * np.exp(-pos / params.tau_m), 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Incremental traces


@dataclass(frozen=True)
class TraceState:
    """Exponential-filter state for an eps-type or kappa-type convolution.

    ``slow`` and ``fast`` may be floats or equally shaped arrays, so one
    state can carry a whole population of traces.
    """

    kind: str = "psp"  # "psp" or "reset"
    slow: object = 0.0
    fast: object = 0.0
    last_value: object = 0.0
    params: KernelParams = field(default=DEFAULT_KERNELS, repr=False)

    @classmethod
    def zeros(cls, kind="psp", shape=(), params: KernelParams = DEFAULT_KERNELS):
        z = np.zeros(shape) if shape != () else 0.0
        return cls(kind=kind, slow=z, fast=z, last_value=z, params=params)

    @property
    def value(self):
        if self.kind == "psp":
            return self.params.eps0 * (self.slow - self.fast)
        return self.params.kappa0 * self.slow


def trace_step(state: TraceState, dt: float, impulse=0.0) -> TraceState:
    """Advance ``state`` by one grid step of width ``dt``.

    ``impulse`` is the spike weight (or gated value) arriving at the current
    step; it is added to both exponentials before they decay, so it shows up
    in ``value`` at the next step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    a, b = state.params.decays(dt)
    slow = (state.slow + impulse) * a
    fast = (state.fast + impulse) * b
    new = replace(state, slow=slow, fast=fast)
    return replace(new, last_value=new.value)


@dataclass(frozen=True)
class DoubleTraceState:
    """Input PSP trace gated by hidden spikes and filtered once more by eps.

    ``inner`` follows (X_i * eps)(t); each hidden spike injects the current
    inner value into ``outer``, which then equals
    ([Y_h (X_i * eps)] * eps)(t).
    """

    inner: TraceState
    outer: TraceState

    @classmethod
    def zeros(cls, shape=(), params: KernelParams = DEFAULT_KERNELS):
        return cls(TraceState.zeros("psp", shape, params), TraceState.zeros("psp", shape, params))

    @property
    def value(self):
        return self.outer.value


def double_trace_step(state: DoubleTraceState, dt: float, input_impulse=0.0, gate=0.0) -> DoubleTraceState:
    """One step of the double convolution.

    ``gate`` is the hidden spike count at this step; ``input_impulse`` the
    (delay-shifted) input spike count arriving at this step.
    """
    gated = gate * state.inner.value
    return DoubleTraceState(
        inner=trace_step(state.inner, dt, input_impulse),
        outer=trace_step(state.outer, dt, gated),
    )


# ---------------------------------------------------------------------------
# Vectorized filters over whole rasters (same arithmetic as trace_step)


def _rows(x):
    x = np.asarray(x, dtype=float)
    return np.ascontiguousarray(x.reshape(-1, x.shape[-1])), x.shape


def exp_filter(x, decay: float) -> np.ndarray:
    """y[t] = sum_{s < t} x[s] * decay**(t - s), along the last axis."""
    rows, shape = _rows(x)
    return _engine.exp_filter_rows(rows, decay).reshape(shape)


def psp_filter(raster, dt: float, params: KernelParams = DEFAULT_KERNELS) -> np.ndarray:
    """(raster * eps) sampled on the grid along the last axis, strictly-later visibility."""
    a, b = params.decays(dt)
    rows, shape = _rows(raster)
    return _engine.psp_filter_rows(rows, a, b, params.eps0).reshape(shape)


def reset_filter(raster, dt: float, params: KernelParams = DEFAULT_KERNELS) -> np.ndarray:
    a, _ = params.decays(dt)
    return params.kappa0 * exp_filter(raster, a)


def psp_filter_reverse(signal: np.ndarray, dt: float, params: KernelParams = DEFAULT_KERNELS) -> np.ndarray:
    """Anti-causal counterpart: r[s] = sum_{t > s} signal[t] * eps((t - s) dt)."""
    rev = signal[..., ::-1]
    return psp_filter(rev, dt, params)[..., ::-1]


def kernel_sum(times, t, kernel=psp_kernel, weights=None, params: KernelParams = DEFAULT_KERNELS) -> float:
    """Brute-force sum_f w_f kernel(t - t_f) over spikes strictly before ``t``."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return 0.0
    w = np.ones_like(times) if weights is None else np.asarray(weights, dtype=float)
    lags = t - times
    mask = lags > 0
    return float(np.sum(w[mask] * kernel(lags[mask], params)))
