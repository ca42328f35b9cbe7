"""Log-likelihood objective and the weight-update rules derived from it.

Target spike trains enter the error signal as discrete Dirac masses of
``1 / dt`` at their grid step, so ``dt * sum_t`` reproduces the spike terms
of the continuous integrals exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _engine
from .kernels import exp_filter, psp_filter_reverse
from .network import EpisodeRecord, LayeredNetwork, raster


@dataclass(frozen=True)
class LearningRates:
    eta_o: float
    eta_h: float
    eta_single: float

    def __post_init__(self):
        if min(self.eta_o, self.eta_h, self.eta_single) <= 0:
            raise ValueError("learning rates must be positive")

    @classmethod
    def for_network(cls, n_i: int, n_h: int, n_o: int, n_s: int) -> "LearningRates":
        n_h = max(n_h, 1)
        return cls(eta_o=0.02 / n_h, eta_h=4.0 / (n_i * n_o * n_s), eta_single=4.0 / n_i)


@dataclass(frozen=True)
class ScalingParams:
    gamma: float = 1e-2
    nu_max: float = 40.0  # Hz
    nu_min: float = 2.0  # Hz

    def __post_init__(self):
        if not (self.nu_max > self.nu_min > 0):
            raise ValueError("require nu_max > nu_min > 0")


def target_raster(record: EpisodeRecord, targets: Sequence) -> np.ndarray:
    if len(targets) != record.output_raster.shape[0]:
        raise ValueError("one target train per output neuron required")
    return raster(targets, record.dt, record.steps)


def log_likelihood(record: EpisodeRecord, targets: Sequence) -> float:
    """sum_o [ sum_{target f} log rho_o(t_f) - dt sum_t rho_o(t) ].

    Returns ``-inf`` if some target falls where the rate is exactly zero.
    """
    ref = target_raster(record, targets)
    rho = record.output_rho
    with np.errstate(divide="ignore"):
        log_rho = np.log(rho)
    hit = ref > 0
    spike_term = np.sum(ref[hit] * log_rho[hit])
    return float(spike_term - record.dt * np.sum(rho))


def output_error_signal(record: EpisodeRecord, targets: Sequence, rate_cap: Optional[float] = None) -> np.ndarray:
    """delta_o(t) = [Z_ref(t) - rho_o(t)] / delta_u_o, shape (n_o, K).

    ``rate_cap`` (spikes/ms) bounds rho_o before it enters the signal; None
    gives the exact gradient of :func:`log_likelihood`.
    """
    ref = target_raster(record, targets) / record.dt
    rho = record.output_rho if rate_cap is None else np.minimum(record.output_rho, rate_cap)
    return (ref - rho) / record.output_escape.delta_u


def _readout_eta(record: EpisodeRecord, rates: LearningRates) -> float:
    return rates.eta_o if record.hidden_raster is not None else rates.eta_single


def output_update_from_error(record: EpisodeRecord, error: np.ndarray, eta: float) -> np.ndarray:
    return eta * record.dt * (error @ record.pre_psp.T)


def output_weight_update(record: EpisodeRecord, targets: Sequence, rates: LearningRates) -> np.ndarray:
    """Gradient-ascent change of the readout weights, shape (n_o, n_pre)."""
    return output_update_from_error(record, output_error_signal(record, targets), _readout_eta(record, rates))


def hidden_update_from_error(
    record: EpisodeRecord,
    error: np.ndarray,
    w_oh: Optional[np.ndarray],
    eta_h: float,
) -> np.ndarray:
    """(eta_h / du_h) dt sum_t sum_o c_oh error_o(t) D_hi(t).

    ``c_oh = w_oh`` for the analytic rule and ``1`` when ``w_oh`` is None.
    ``D_hi`` is the double convolution. Rather than materializing it, the
    time sum is swapped with the outer convolution:

        sum_t g(t) D_hi(t) = sum_{hidden spikes t'} psp_hi(t') sum_{t > t'} g(t) eps(t - t')

    so only the delayed input PSP at hidden spike times is needed.
    """
    if w_oh is None:
        g = np.broadcast_to(error.sum(axis=0), (record.hidden_raster.shape[0], error.shape[1]))
    else:
        g = w_oh.T @ error
    back = record.dt * psp_filter_reverse(np.ascontiguousarray(g), record.dt, record.kernels)

    dw = _engine.gated_input_sum(
        np.ascontiguousarray(record.hidden_raster), np.ascontiguousarray(back),
        record.input_psp(), np.ascontiguousarray(record.delays),
    )
    return (eta_h / record.hidden_escape.delta_u) * dw


def hidden_weight_update(
    record: EpisodeRecord,
    targets: Sequence,
    net: LayeredNetwork,
    rates: LearningRates,
) -> np.ndarray:
    """Backpropagated change of the input-to-hidden weights, shape (n_h, n_i)."""
    err = output_error_signal(record, targets)
    return hidden_update_from_error(record, err, net.w_oh, rates.eta_h)


def hidden_weight_update_traces(record, error, w_oh, eta_h) -> np.ndarray:
    """Same quantity as :func:`hidden_update_from_error`, summed over stored traces."""
    dbl = record.compute_double_traces()
    g = error.sum(axis=0)[None, :].repeat(dbl.shape[0], 0) if w_oh is None else w_oh.T @ error
    return (eta_h / record.hidden_escape.delta_u) * record.dt * np.einsum("ht,hit->hi", g, dbl)


def synaptic_scaling(w_hi: np.ndarray, nu_h, params: ScalingParams = ScalingParams()) -> np.ndarray:
    """Homeostatic change pushing each hidden rate (Hz) back into [nu_min, nu_max]."""
    w_hi = np.asarray(w_hi, dtype=float)
    nu = np.asarray(nu_h, dtype=float)
    if np.any(nu < 0):
        raise ValueError("firing rates must be non-negative")
    drive = np.where(nu > params.nu_max, params.nu_max - nu,
                     np.where(nu < params.nu_min, params.nu_min - nu, 0.0))
    if w_hi.ndim == 2:
        drive = drive[:, None]
    return params.gamma * np.abs(w_hi) * drive


# ---------------------------------------------------------------------------
# Filtered-error ("bio") variant


@dataclass(frozen=True)
class FilteredError:
    value: object = 0.0  # 1 / ms, per output neuron
    tau_D: float = 50.0  # ms


def bio_filtered_error_step(state: FilteredError, actual, target, dt: float) -> FilteredError:
    """Advance tau_D d(err)/dt = -err + [Z_ref - Z] across one step.

    The decay between steps is integrated exactly; spikes at this step add
    ``(target - actual) / tau_D`` and are included in the returned value.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    decay = np.exp(-dt / state.tau_D)
    jump = (np.asarray(target, dtype=float) - np.asarray(actual, dtype=float)) / state.tau_D
    return FilteredError(value=state.value * decay + jump, tau_D=state.tau_D)


def bio_filtered_errors(record: EpisodeRecord, targets: Sequence, tau_D: float = 50.0) -> np.ndarray:
    """Whole-episode filtered error, shape (n_o, K); matches repeated steps."""
    diff = target_raster(record, targets) - record.output_raster
    decay = np.exp(-record.dt / tau_D)
    return (exp_filter(diff, decay) + diff) / tau_D


def bio_gain(record_or_escape, gain: Optional[float]) -> float:
    """Factor applied to the filtered error; None selects 1 / delta_u_o."""
    if gain is not None:
        return gain
    escape = getattr(record_or_escape, "output_escape", record_or_escape)
    return 1.0 / escape.delta_u


def bio_weight_updates(record: EpisodeRecord, filtered: np.ndarray, rates: LearningRates,
                       gain: Optional[float] = None):
    """(dw_oh, dw_hi) with the filtered error and no w_oh factor in the hidden rule.

    The filtered error stands in for the bracket of the backprop error, so by
    default it carries the same 1 / delta_u_o factor; ``gain=1`` uses it bare.
    """
    filtered = bio_gain(record, gain) * filtered
    dw_oh = output_update_from_error(record, filtered, _readout_eta(record, rates))
    dw_hi = None
    if record.hidden_raster is not None:
        dw_hi = hidden_update_from_error(record, filtered, None, rates.eta_h)
    return dw_oh, dw_hi


class OnlineBioPlasticity:
    """Step hook applying the filtered-error rules continuously within an episode.

    Use with :func:`mlspike.network.simulate_episode_stepwise`. Weights move
    by ``rate * dt`` after every step and are clamped at the end via
    :meth:`finish`.
    """

    def __init__(self, net: LayeredNetwork, targets: Sequence, rates: LearningRates,
                 tau_D: float = 50.0, learn_hidden: bool = True, gain: Optional[float] = None):
        cfg = net.config
        self.gain = bio_gain(cfg.output_escape, gain)
        self.net = net
        self.dt = cfg.dt
        self.ref = raster(targets, cfg.dt, cfg.steps)
        self.rates = rates
        self.learn_hidden = learn_hidden and net.multilayer
        self.err = FilteredError(np.zeros(cfg.n_o), tau_D)

    def __call__(self, t: int, values: dict) -> None:
        self.err = bio_filtered_error_step(self.err, values["output_spikes"], self.ref[:, t], self.dt)
        e = self.gain * self.err.value
        eta_o = self.rates.eta_o if self.net.multilayer else self.rates.eta_single
        self.net.w_oh += eta_o * self.dt * np.outer(e, values["pre_psp"])
        if self.learn_hidden:
            du_h = self.net.config.hidden_escape.delta_u
            self.net.w_hi += (self.rates.eta_h / du_h) * self.dt * e.sum() * values["double"]

    def finish(self) -> None:
        self.net.clamp()


# ---------------------------------------------------------------------------
# End-of-episode application


RULES = ("backprop", "bio")


def episode_update(
    net: LayeredNetwork,
    record: EpisodeRecord,
    targets: Sequence,
    rates: LearningRates,
    rule: str = "backprop",
    scaling: Optional[ScalingParams] = ScalingParams(),
    tau_D: float = 50.0,
    rate_cap: Optional[float] = "step",
    gain: Optional[float] = None,
) -> None:
    """Apply one episode's learning to ``net`` in place.

    Order: gradient update, synaptic scaling of hidden weights, clamping.
    Hidden weights of the fixed variant move only through scaling.
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    variant = net.config.variant
    if rate_cap == "step":
        rate_cap = 1.0 / record.dt
    if rule == "backprop":
        err = output_error_signal(record, targets, rate_cap)
        dw_oh = output_update_from_error(record, err, _readout_eta(record, rates))
        dw_hi = hidden_update_from_error(record, err, net.w_oh, rates.eta_h) if variant == "free" else None
    else:
        filt = bio_gain(record, gain) * bio_filtered_errors(record, targets, tau_D)
        dw_oh = output_update_from_error(record, filt, _readout_eta(record, rates))
        dw_hi = hidden_update_from_error(record, filt, None, rates.eta_h) if variant == "free" else None
    net.w_oh += dw_oh
    if dw_hi is not None:
        net.w_hi += dw_hi
    if net.multilayer and scaling is not None:
        net.w_hi += synaptic_scaling(net.w_hi, record.hidden_rates_hz(), scaling)
    net.clamp()
