"""Stochastic SRM point neuron with exponential escape noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import DEFAULT_KERNELS, KernelParams, TraceState, trace_step

# Exponent cap for the escape rate; far outside the operating range but keeps
# rates (and everything multiplied by them) finite.
MAX_EXPONENT = 80.0


class ConfigurationError(ValueError):
    """Inconsistent sizes or parameters."""


@dataclass(frozen=True)
class EscapeParams:
    rho0: float = 0.01  # spikes / ms at threshold
    theta: float = 15.0  # mV
    delta_u: float = 0.2  # mV

    def __post_init__(self):
        if self.rho0 <= 0 or self.delta_u <= 0:
            raise ValueError("rho0 and delta_u must be positive")


OUTPUT_ESCAPE = EscapeParams(delta_u=0.2)
HIDDEN_ESCAPE = EscapeParams(delta_u=2.0)


def membrane_potential(weights, psp_values, reset_value=0.0):
    """u = sum_h w_h psp_h + reset."""
    weights = np.asarray(weights, dtype=float)
    psp_values = np.asarray(psp_values, dtype=float)
    if weights.shape[-1] != psp_values.shape[-1]:
        raise ConfigurationError(
            f"weights ({weights.shape[-1]}) and psp values ({psp_values.shape[-1]}) differ in length"
        )
    return weights @ psp_values + reset_value


def escape_rate(u, params: EscapeParams = OUTPUT_ESCAPE):
    """rho0 * exp((u - theta) / delta_u), in spikes per ms."""
    x = np.minimum((np.asarray(u, dtype=float) - params.theta) / params.delta_u, MAX_EXPONENT)
    out = params.rho0 * np.exp(x)
    return float(out) if out.ndim == 0 else out


def spike_probability(rho, dt: float):
    return np.minimum(np.asarray(rho) * dt, 1.0)


def sample_spike(rho: float, dt: float, rng: np.random.Generator) -> bool:
    """Bernoulli draw with probability min(rho dt, 1); consumes one uniform."""
    return bool(rng.random() < min(rho * dt, 1.0))


@dataclass(frozen=True)
class NeuronState:
    """Single neuron driven by ``len(weights)`` afferents."""

    psp_traces: TraceState
    reset_trace: TraceState
    u: float = 0.0
    rho: float = 0.0

    @classmethod
    def fresh(cls, n_afferents: int, params: KernelParams = DEFAULT_KERNELS):
        return cls(
            psp_traces=TraceState.zeros("psp", (n_afferents,), params),
            reset_trace=TraceState.zeros("reset", (), params),
        )


def neuron_step(state: NeuronState, weights, afferent_spikes, rng, dt=1.0,
                escape: EscapeParams = OUTPUT_ESCAPE):
    """Evaluate u and rho at the current step, sample, then advance traces.

    Returns ``(new_state, spiked)``; ``new_state.u``/``rho`` are the values
    that governed this step's draw.
    """
    u = float(membrane_potential(weights, state.psp_traces.value, state.reset_trace.value))
    rho = escape_rate(u, escape)
    spiked = sample_spike(rho, dt, rng)
    new = NeuronState(
        psp_traces=trace_step(state.psp_traces, dt, np.asarray(afferent_spikes, dtype=float)),
        reset_trace=trace_step(state.reset_trace, dt, float(spiked)),
        u=u,
        rho=rho,
    )
    return new, spiked
