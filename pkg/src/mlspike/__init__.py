"""Supervised learning of precise spike timing in multilayer networks of stochastic spiking neurons."""
from .kernels import KernelParams, psp_kernel, reset_kernel
from .learning import LearningRates, ScalingParams, episode_update, log_likelihood
from .metrics import PerformanceTracker, classify, vrd, vrd_spatio
from .network import LayeredNetwork, NetworkConfig, initialize, simulate_episode
from .neuron import ConfigurationError, EscapeParams
from .patterns import PatternSet, gen_class_targets, gen_poisson_input, gen_poisson_pattern, jitter

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "EscapeParams", "KernelParams", "LayeredNetwork", "LearningRates",
    "NetworkConfig", "PatternSet", "PerformanceTracker", "ScalingParams", "classify",
    "episode_update", "gen_class_targets", "gen_poisson_input", "gen_poisson_pattern", "initialize", "jitter",
    "log_likelihood", "psp_kernel", "reset_kernel", "simulate_episode", "vrd", "vrd_spatio",
]
