"""Layered network container and episode simulation.

Two simulation paths produce the same :class:`EpisodeRecord`:

* ``simulate_episode`` filters the (delay-shifted, weighted) input impulses
  in one vectorized pass per layer and only runs the reset/sampling
  recursion sequentially;
* ``simulate_episode_stepwise`` advances explicit trace states step by step
  and additionally records the double-convolution traces. It is the
  reference for the fast path and hosts online plasticity.

Both consume uniforms in the same order: one (K, n_h) block for the hidden
layer, then one (K, n_o) block for the output layer.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import _engine
from .kernels import (
    DEFAULT_KERNELS,
    DoubleTraceState,
    KernelParams,
    TraceState,
    double_trace_step,
    psp_filter,
    trace_step,
)
from .neuron import (
    HIDDEN_ESCAPE,
    MAX_EXPONENT,
    OUTPUT_ESCAPE,
    ConfigurationError,
    EscapeParams,
    escape_rate,
)

VARIANTS = ("free", "fixed", "single")
_VARIANT_ALIASES = {
    "multilayer-free": "free",
    "multilayer-fixed-hidden": "fixed",
    "fixed-hidden": "fixed",
    "single-layer": "single",
}


def canonical_variant(name: str) -> str:
    name = _VARIANT_ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ConfigurationError(f"unknown network variant {name!r}")
    return name


@dataclass(frozen=True)
class NetworkConfig:
    n_i: int = 100
    n_h: int = 10
    n_o: int = 1
    variant: str = "free"
    dt: float = 1.0  # ms
    T: float = 500.0  # ms
    kernels: KernelParams = DEFAULT_KERNELS
    hidden_escape: EscapeParams = HIDDEN_ESCAPE
    output_escape: EscapeParams = OUTPUT_ESCAPE
    max_delay: int = 40  # ms
    w_max: float = 100.0
    w_oh_min: float = 0.01  # lower bound for sign-constrained output weights
    hidden_init: float = 3.0
    single_init: float = 1.7
    # None selects the single-output behaviour when n_o == 1
    positive_outputs: Optional[bool] = None
    equal_output_init: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.n_i < 1 or self.n_o < 1:
            raise ConfigurationError("n_i and n_o must be at least 1")
        if self.variant != "single" and self.n_h < 1:
            raise ConfigurationError("a multilayer network needs n_h >= 1")
        k = self.T / self.dt
        if abs(k - round(k)) > 1e-9:
            raise ConfigurationError("T must be a multiple of dt")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def constrain_positive(self) -> bool:
        return self.n_o == 1 if self.positive_outputs is None else self.positive_outputs

    @property
    def equal_init(self) -> bool:
        return self.n_o == 1 if self.equal_output_init is None else self.equal_output_init


@dataclass
class LayeredNetwork:
    """Weights and delays of a (possibly single-layer) feedforward network.

    For the single-layer variant there is no hidden layer: ``w_hi`` and
    ``d_hi`` are ``None`` and ``w_oh`` holds the input-to-output weights.
    """

    config: NetworkConfig
    w_oh: np.ndarray
    w_hi: Optional[np.ndarray] = None
    d_hi: Optional[np.ndarray] = None

    @property
    def multilayer(self) -> bool:
        return self.config.variant != "single"

    @property
    def n_pre(self) -> int:
        """Afferents of each output neuron."""
        return self.config.n_h if self.multilayer else self.config.n_i

    def copy(self) -> "LayeredNetwork":
        return LayeredNetwork(
            self.config,
            self.w_oh.copy(),
            None if self.w_hi is None else self.w_hi.copy(),
            None if self.d_hi is None else self.d_hi.copy(),
        )

    def clamp(self) -> None:
        """Project weights back onto their bounds (in place)."""
        cfg = self.config
        if self.multilayer:
            np.clip(self.w_hi, -cfg.w_max, cfg.w_max, out=self.w_hi)
            if cfg.constrain_positive:
                np.clip(self.w_oh, cfg.w_oh_min, cfg.w_max, out=self.w_oh)
            else:
                np.clip(self.w_oh, -cfg.w_max, cfg.w_max, out=self.w_oh)
        else:
            np.clip(self.w_oh, -cfg.w_max, cfg.w_max, out=self.w_oh)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "format": "mlspike.network/1",
            "config": cfg,
            "w_oh": self.w_oh.tolist(),
            "w_hi": None if self.w_hi is None else self.w_hi.tolist(),
            "d_hi": None if self.d_hi is None else self.d_hi.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LayeredNetwork":
        cfg = dict(data["config"])
        cfg["kernels"] = KernelParams(**cfg["kernels"])
        cfg["hidden_escape"] = EscapeParams(**cfg["hidden_escape"])
        cfg["output_escape"] = EscapeParams(**cfg["output_escape"])
        config = NetworkConfig(**cfg)
        w_hi = None if data["w_hi"] is None else np.array(data["w_hi"], dtype=float)
        d_hi = None if data["d_hi"] is None else np.array(data["d_hi"], dtype=np.int64)
        return cls(config, np.array(data["w_oh"], dtype=float), w_hi, d_hi)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "LayeredNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def initialize(config: NetworkConfig, rng: np.random.Generator) -> LayeredNetwork:
    """Draw initial weights (and delays) for ``config``.

    Draw order: hidden weights, delays, output weights.
    """
    n_i, n_h, n_o = config.n_i, config.n_h, config.n_o
    if config.variant == "single":
        w = rng.uniform(0.0, config.single_init, size=(n_o, n_i))
        return LayeredNetwork(config, w)
    w_hi = rng.uniform(0.0, config.hidden_init, size=(n_h, n_i))
    d_hi = rng.integers(1, config.max_delay + 1, size=(n_h, n_i))
    if config.equal_init:
        w_oh = np.full((n_o, n_h), 12.0 / n_h)
    else:
        w_oh = rng.uniform(0.0, 30.0 / n_h, size=(n_o, n_h))
    return LayeredNetwork(config, w_oh, w_hi, d_hi)


# ---------------------------------------------------------------------------
# Spike trains <-> rasters


def to_steps(train, dt: float, steps: int) -> np.ndarray:
    idx = np.rint(np.asarray(train, dtype=float) / dt).astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= steps):
        raise ValueError("spike time outside [0, T)")
    return idx


def raster(trains: Sequence, dt: float, steps: int) -> np.ndarray:
    """Spike counts per (neuron, step)."""
    n = len(trains)
    if n == 0:
        return np.zeros((0, steps))
    sizes = [len(tr) for tr in trains]
    idx = to_steps(np.concatenate([np.asarray(tr, dtype=float) for tr in trains]), dt, steps)
    flat = np.repeat(np.arange(n), sizes) * steps + idx
    return np.bincount(flat, minlength=n * steps).astype(float).reshape(n, steps)


def trains_from_raster(r: np.ndarray, dt: float) -> list:
    trains = []
    for row in r:
        steps = np.repeat(np.arange(row.size), row.astype(np.int64))
        trains.append(steps * dt)
    return trains


def delayed_raster(x: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """(n_h, n_i, K) raster with input i shifted by delays[h, i] steps."""
    n_h, n_i = delays.shape
    K = x.shape[1]
    out = np.zeros((n_h, n_i, K))
    for h in range(n_h):
        for i in range(n_i):
            d = delays[h, i]
            if d < K:
                out[h, i, d:] = x[i, : K - d]
    return out


# ---------------------------------------------------------------------------
# Episode record


@dataclass
class EpisodeRecord:
    """Everything a learning rule needs from one pattern presentation.

    Arrays are (neurons, steps). ``pre_psp`` is (Y * eps) of the layer that
    feeds the outputs, i.e. hidden neurons, or inputs for a single-layer
    network. ``double_traces`` is filled by the stepwise simulation only;
    use :meth:`compute_double_traces` otherwise.
    """

    dt: float
    T: float
    input_raster: np.ndarray
    output_raster: np.ndarray
    pre_psp: np.ndarray
    output_u: np.ndarray
    output_rho: np.ndarray
    output_reset: np.ndarray
    hidden_raster: Optional[np.ndarray] = None
    hidden_u: Optional[np.ndarray] = None
    hidden_rho: Optional[np.ndarray] = None
    delays: Optional[np.ndarray] = None
    output_escape: EscapeParams = OUTPUT_ESCAPE
    hidden_escape: EscapeParams = HIDDEN_ESCAPE
    kernels: KernelParams = DEFAULT_KERNELS
    double_traces: Optional[np.ndarray] = None
    hidden_input_psp: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return self.output_raster.shape[1]

    @property
    def input_trains(self) -> list:
        return trains_from_raster(self.input_raster, self.dt)

    @property
    def hidden_trains(self) -> list:
        return [] if self.hidden_raster is None else trains_from_raster(self.hidden_raster, self.dt)

    @property
    def output_trains(self) -> list:
        return trains_from_raster(self.output_raster, self.dt)

    def hidden_rates_hz(self) -> np.ndarray:
        return self.hidden_raster.sum(axis=1) / (self.T / 1000.0)

    def input_psp(self) -> np.ndarray:
        """(X_i * eps)(t) at the input layer, no delays: (n_i, K)."""
        return psp_filter(self.input_raster, self.dt, self.kernels)

    def delayed_input_psp(self) -> np.ndarray:
        """(X_i * eps)(t - d_hi) seen by each hidden neuron: (n_h, n_i, K)."""
        if self.hidden_input_psp is None:
            shifted = delayed_raster(self.input_raster, self.delays)
            self.hidden_input_psp = psp_filter(shifted, self.dt, self.kernels)
        return self.hidden_input_psp

    def compute_double_traces(self) -> np.ndarray:
        """([Y_h (X_i * eps)] * eps)(t) for all (h, i): (n_h, n_i, K)."""
        if self.double_traces is None:
            gated = self.hidden_raster[:, None, :] * self.delayed_input_psp()
            self.double_traces = psp_filter(gated, self.dt, self.kernels)
        return self.double_traces

    def with_output_weights(self, w_oh: np.ndarray) -> "EpisodeRecord":
        """Same spike trains, output potentials/rates recomputed for ``w_oh``."""
        u = np.asarray(w_oh) @ self.pre_psp + self.output_reset
        return replace(self, output_u=u, output_rho=escape_rate(u, self.output_escape))


# ---------------------------------------------------------------------------
# Simulation


def _input_steps(net: LayeredNetwork, inputs) -> np.ndarray:
    cfg = net.config
    if isinstance(inputs, np.ndarray) and inputs.ndim == 2:
        if inputs.shape != (cfg.n_i, cfg.steps):
            raise ConfigurationError(f"input raster must have shape {(cfg.n_i, cfg.steps)}")
        return np.ascontiguousarray(inputs, dtype=float)
    if len(inputs) != cfg.n_i:
        raise ConfigurationError(f"expected {cfg.n_i} input trains, got {len(inputs)}")
    return raster(inputs, cfg.dt, cfg.steps)


def _sample(drive, uniforms, escape: EscapeParams, cfg: NetworkConfig):
    a, _ = cfg.kernels.decays(cfg.dt)
    return _engine.sample_layer(
        np.ascontiguousarray(drive), np.ascontiguousarray(uniforms), a, cfg.kernels.kappa0,
        escape.rho0, escape.theta, escape.delta_u, cfg.dt, MAX_EXPONENT,
    )


def hidden_drive(net: LayeredNetwork, x: np.ndarray) -> np.ndarray:
    """Synaptic part of every hidden potential, sum_i w_hi (X_i * eps)(t - d_hi)."""
    cfg = net.config
    imp = _engine.delayed_impulses(x, np.ascontiguousarray(net.w_hi), np.ascontiguousarray(net.d_hi))
    return psp_filter(imp, cfg.dt, cfg.kernels)


def simulate_episode(net: LayeredNetwork, inputs: Sequence, rng: np.random.Generator) -> EpisodeRecord:
    """Present one input pattern for T and record spikes, traces and rates."""
    cfg = net.config
    x = _input_steps(net, inputs)
    K = cfg.steps
    if net.multilayer:
        u_h_rand = rng.random((K, cfg.n_h))
        y, u_h, rho_h, _ = _sample(hidden_drive(net, x), u_h_rand, cfg.hidden_escape, cfg)
        pre = y
    else:
        y = u_h = rho_h = None
        pre = x
    pre_psp = psp_filter(pre, cfg.dt, cfg.kernels)
    u_o_rand = rng.random((K, cfg.n_o))
    z, u_o, rho_o, reset_o = _sample(net.w_oh @ pre_psp, u_o_rand, cfg.output_escape, cfg)
    return EpisodeRecord(
        dt=cfg.dt, T=cfg.T, input_raster=x, output_raster=z, pre_psp=pre_psp,
        output_u=u_o, output_rho=rho_o, output_reset=reset_o,
        hidden_raster=y, hidden_u=u_h, hidden_rho=rho_h,
        delays=net.d_hi, output_escape=cfg.output_escape, hidden_escape=cfg.hidden_escape,
        kernels=cfg.kernels,
    )


StepHook = Callable[[int, dict], None]


def simulate_episode_stepwise(
    net: LayeredNetwork,
    inputs: Sequence,
    rng: np.random.Generator,
    on_step: Optional[StepHook] = None,
) -> EpisodeRecord:
    """Reference simulation that advances trace states one step at a time.

    ``on_step(t, values)`` is called after both layers have been sampled at
    step ``t``; ``values`` holds the traces that governed that step
    (``pre_psp``, ``double``, ``hidden_spikes``, ``output_spikes``,
    ``output_rho``). The hook may modify ``net``'s weights in place; the
    change takes effect from step ``t + 1``.
    """
    cfg = net.config
    dt, K, kp = cfg.dt, cfg.steps, cfg.kernels
    x = _input_steps(net, inputs)
    n_o, n_pre = cfg.n_o, net.n_pre

    if net.multilayer:
        u_h_rand = rng.random((K, cfg.n_h))
    u_o_rand = rng.random((K, n_o))

    out = {k: np.zeros((n_o, K)) for k in ("z", "u", "rho", "reset")}
    pre_psp = np.zeros((n_pre, K))
    pre_trace = TraceState.zeros("psp", (n_pre,), kp)
    out_reset = TraceState.zeros("reset", (n_o,), kp)

    if net.multilayer:
        n_h = cfg.n_h
        xd = delayed_raster(x, net.d_hi)
        dbl = DoubleTraceState.zeros((n_h, cfg.n_i), kp)
        hid_reset = TraceState.zeros("reset", (n_h,), kp)
        hid = {k: np.zeros((n_h, K)) for k in ("y", "u", "rho")}
        dbl_rec = np.zeros((n_h, cfg.n_i, K))
        inp_rec = np.zeros((n_h, cfg.n_i, K))

    for t in range(K):
        values = {}
        if net.multilayer:
            inner = dbl.inner.value
            inp_rec[:, :, t] = inner
            dbl_rec[:, :, t] = dbl.value
            u = np.sum(net.w_hi * inner, axis=1) + hid_reset.value
            rho = escape_rate(u, cfg.hidden_escape)
            y_t = (u_h_rand[t] < np.minimum(rho * dt, 1.0)).astype(float)
            hid["y"][:, t], hid["u"][:, t], hid["rho"][:, t] = y_t, u, rho
            pre_t = y_t
            values["double"] = dbl.value
        else:
            pre_t = x[:, t]

        psp = pre_trace.value
        pre_psp[:, t] = psp
        reset_val = out_reset.value
        u = net.w_oh @ psp + reset_val
        rho = escape_rate(u, cfg.output_escape)
        z_t = (u_o_rand[t] < np.minimum(rho * dt, 1.0)).astype(float)
        out["z"][:, t], out["u"][:, t], out["rho"][:, t], out["reset"][:, t] = z_t, u, rho, reset_val

        if on_step is not None:
            values.update(pre_psp=psp, output_spikes=z_t, output_rho=rho,
                          hidden_spikes=pre_t if net.multilayer else None)
            on_step(t, values)

        if net.multilayer:
            dbl = double_trace_step(dbl, dt, xd[:, :, t], y_t[:, None])
            hid_reset = trace_step(hid_reset, dt, y_t)
        pre_trace = trace_step(pre_trace, dt, pre_t)
        out_reset = trace_step(out_reset, dt, z_t)

    rec = EpisodeRecord(
        dt=dt, T=cfg.T, input_raster=x, output_raster=out["z"], pre_psp=pre_psp,
        output_u=out["u"], output_rho=out["rho"], output_reset=out["reset"],
        output_escape=cfg.output_escape, hidden_escape=cfg.hidden_escape, kernels=kp,
    )
    if net.multilayer:
        rec.hidden_raster, rec.hidden_u, rec.hidden_rho = hid["y"], hid["u"], hid["rho"]
        rec.delays = net.d_hi
        rec.double_traces = dbl_rec
        rec.hidden_input_psp = inp_rec
    return rec
