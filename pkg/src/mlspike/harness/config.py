"""Experiment configuration, presets and sweep expansion."""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from ..learning import RULES
from ..network import canonical_variant
from ..neuron import ConfigurationError

EXPERIMENTS = (
    "single-map", "noise-map", "xor", "structure-compare", "capacity",
    "generalization", "spatio-temporal", "ratio-sweep", "bio-compare",
)

_RULE_ALIASES = {"backprop": "backprop", "bio": "bio", "bio-backprop": "bio"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_i: int = 100
    n_h: int = 10
    n_o: int = 1
    p: int = 1
    c: Optional[int] = None  # None: one class per pattern
    n_s: int = 1
    sigma: float = 0.0
    episodes: Optional[int] = None  # None: 1000 p
    runs: int = 20
    base_seed: int = 0
    rule: str = "backprop"
    variant: str = "free"
    bio_gain: Optional[float] = None  # filtered-error factor; None: 1 / delta_u_o
    targets: Optional[list] = None  # fixed target times per output (single-pattern tasks)
    hidden_ratio: Optional[float] = None  # n_h = round(ratio * n_o) when set
    n_train: int = 15
    n_test: int = 25
    scale: float = 1.0
    sweep: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        rule = _RULE_ALIASES.get(self.rule)
        if rule not in RULES:
            raise ConfigurationError(f"unknown rule {self.rule!r}")
        object.__setattr__(self, "rule", rule)
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.episodes is not None and self.episodes < 1:
            raise ConfigurationError("episodes must be >= 1")
        if self.scale <= 0:
            raise ConfigurationError("scale must be positive")
        if min(self.n_i, self.n_o, self.p, self.n_s) < 1 or (self.c is not None and self.c < 1) or self.n_h < 0:
            raise ConfigurationError("sizes must be positive")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative")
        known = {f.name for f in fields(self)} | {"hidden_ratio"}
        for key in self.sweep:
            if key not in known or key in ("experiment", "sweep", "runs", "base_seed", "scale"):
                raise ConfigurationError(f"cannot sweep over {key!r}")

    @property
    def total_episodes(self) -> int:
        eps = self.episodes if self.episodes is not None else 1000 * self.p
        return max(1, int(round(eps * self.scale)))

    @property
    def patterns(self) -> int:
        """Pattern count after scaling, never below the class count."""
        if self.experiment in ("single-map", "spatio-temporal", "xor", "generalization"):
            return self.p
        return max(self.c or 1, int(round(self.p * self.scale)))

    @property
    def classes(self) -> int:
        return self.patterns if self.c is None else min(self.c, self.patterns)

    @property
    def hidden(self) -> int:
        if self.variant == "single":
            return 0
        if self.hidden_ratio is not None:
            return max(1, int(round(self.hidden_ratio * self.n_o)))
        return self.n_h

    def conditions(self) -> list:
        """Cartesian product of the sweep, as (label, config) pairs."""
        if not self.sweep:
            return [("default", self)]
        keys = list(self.sweep)
        out = []
        for combo in itertools.product(*(self.sweep[k] for k in keys)):
            changes = dict(zip(keys, combo))
            label = "_".join(f"{k}={v}" for k, v in changes.items())
            out.append((label, replace(self, sweep={}, **changes)))
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "config" in data and "experiment" not in data:
            data = data["config"]  # manifest written by emit()
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


PRESETS = {
    "single-map": dict(n_h=10, n_o=1, p=1, c=1, n_s=5, episodes=1000, runs=20,
                       targets=[[83.0, 166.0, 249.0, 332.0, 415.0]]),
    "noise-map": dict(n_h=10, n_o=1, p=10, n_s=1, episodes=10_000, runs=20,
                      sweep={"sigma": [0.0, 5.0, 10.0, 15.0, 20.0]}),
    "xor": dict(n_h=10, n_o=1, p=4, c=2, n_s=1, episodes=1000, runs=20,
                sweep={"variant": ["free", "single"]}),
    "structure-compare": dict(n_h=10, n_o=1, p=40, n_s=1, runs=20,
                              sweep={"variant": ["free", "fixed", "single"], "p": [10, 20, 30, 40]}),
    "capacity": dict(n_o=1, c=10, n_s=1, runs=20,
                     sweep={"n_h": [10, 20, 30], "p": [50, 100, 150, 200], "n_s": [1, 5, 10]}),
    "generalization": dict(n_h=20, n_o=1, p=150, c=10, n_s=1, sigma=10.0, episodes=75_000, runs=20,
                           sweep={"n_s": [1, 2, 3, 4, 5]}),
    "spatio-temporal": dict(n_h=20, n_o=3, p=1, c=1, n_s=1, episodes=1000, runs=40,
                            targets=[[125.0], [250.0], [375.0]]),
    "ratio-sweep": dict(n_o=10, p=50, c=10, n_s=1, runs=10,
                        sweep={"n_o": [10, 20, 30], "hidden_ratio": [0.5, 1.0, 2.0, 3.0]}),
    "bio-compare": dict(n_h=10, n_o=1, p=40, c=10, n_s=1, runs=20,
                        sweep={"rule": ["backprop", "bio"], "p": [10, 20, 40, 80, 120, 160, 200]}),
}


def preset(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in PRESETS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    data = dict(PRESETS[experiment])
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **data)


def load_config(path) -> dict:
    """Read a YAML or JSON config (or a manifest) into a plain dict."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping")
    if "config" in data and "experiment" not in data:
        data = data["config"]
    return data
