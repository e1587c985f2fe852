"""Run configuration: dataset profiles, JSON loading and validation."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .loss import OptimizerConfig
from .network import NetworkSpec, TrainConfig, format_theta
from .srm import SurrogateConfig


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# Neuron constants per dataset; the synthetic profile also fixes a trainable
# desk-scale architecture and learning rates.
PROFILES = {
    "nmnist": dict(tau_s=1.0, tau_r=1.0, theta_d=64.0, theta_u=10.0,
                   layer_sizes=[2 * 34 * 34, 512, 10]),
    "dvsgesture": dict(tau_s=5.0, tau_r=5.0, theta_d=64.0, theta_u=10.0,
                       layer_sizes=[2 * 32 * 32, 512, 11]),
    "ntidigits": dict(tau_s=5.0, tau_r=5.0, theta_d=128.0, theta_u=10.0,
                      layer_sizes=[64, 256, 256, 11]),
    "synth": dict(tau_s=5.0, tau_r=5.0, theta_d=64.0, theta_u=10.0,
                  layer_sizes=[16, 32, 2], init_rate=0.1,
                  learning_rate_weights=0.05, learning_rate_delays=1.0),
}


@dataclass
class RunConfig:
    profile: str = "synth"
    # network
    layer_sizes: list = field(default_factory=lambda: [16, 32, 2])
    theta_d: object = 64.0
    delays: bool = True
    tau_s: float = 5.0
    tau_r: float = 5.0
    theta_u: float = 10.0
    sample_time_ms: float = 1.0
    surrogate_kind: str = "exponential"
    surrogate_scale: float = 1.0
    surrogate_sharpness: float = 1.0
    detach_refractory: bool = True
    init_rate: float = 0.05
    # optimisation
    optimizer: str = "adam"
    learning_rate_weights: float = 0.01
    learning_rate_delays: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 100
    batch_size: int = 8
    true_count: int | None = None
    false_count: int | None = None
    # data and output
    train_data: str | None = None
    test_data: str | None = None
    split_polarity: bool = False
    out: str = "runs/out"
    seed: int = 0
    trials: int = 1
    seeds: list | None = None
    # synthetic task
    synth_classes: int = 2
    synth_channels: int = 16
    synth_train_per_class: int = 100
    synth_test_per_class: int = 50
    synth_template_seed: int = 0
    synth_duration_ms: float = 120.0
    # gradient check
    gradcheck_layers: list = field(default_factory=lambda: [4, 8, 3])
    gradcheck_steps: int = 32
    gradcheck_tolerance: float = 1e-4
    gradcheck_h: list = field(default_factory=lambda: [1e-3, 1e-4, 1e-5])

    @classmethod
    def for_profile(cls, name):
        if name not in PROFILES:
            raise ConfigError("profile", f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        return cls(profile=name, **PROFILES[name])

    @classmethod
    def from_sources(cls, path=None, profile=None, overrides=None):
        """Defaults of the profile, then the JSON file, then explicit overrides."""
        data = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except FileNotFoundError:
                raise ConfigError("config", f"file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"invalid JSON: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError("config", "top level must be a JSON object")
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        name = overrides.get("profile", profile or data.get("profile", "synth"))
        cfg = cls.for_profile(name)
        known = {f.name for f in dataclasses.fields(cls)}
        for source in (data, overrides):
            for key, value in source.items():
                if key not in known:
                    raise ConfigError(key, "unknown configuration field")
                setattr(cfg, key, value)
        cfg.profile = name
        return cfg

    def to_dict(self):
        d = dataclasses.asdict(self)
        if not isinstance(self.theta_d, (list, tuple)):
            d["theta_d"] = _json_theta(self.theta_d)
        else:
            d["theta_d"] = [_json_theta(t) for t in self.theta_d]
        return d

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    # -- derived objects --------------------------------------------------

    def trial_seeds(self):
        if self.seeds:
            return [int(s) for s in self.seeds]
        return [self.seed + k for k in range(self.trials)]

    def network_spec(self, seed=None, theta_d=None):
        return NetworkSpec(
            layer_sizes=tuple(self.layer_sizes),
            theta_d=self.theta_d if theta_d is None else theta_d,
            delays=self.delays, tau_s=self.tau_s, tau_r=self.tau_r, theta_u=self.theta_u,
            sample_time_ms=self.sample_time_ms,
            surrogate=SurrogateConfig(self.surrogate_kind, self.surrogate_scale,
                                      self.surrogate_sharpness),
            detach_refractory=self.detach_refractory, init_rate=self.init_rate,
            seed=self.seed if seed is None else seed)

    def train_config(self, seed=None):
        seed = self.seed if seed is None else seed
        opt = OptimizerConfig(self.optimizer, self.learning_rate_weights,
                              self.learning_rate_delays, self.beta1, self.beta2,
                              self.epsilon, seed)
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, optimizer=opt,
                           true_count=self.true_count, false_count=self.false_count,
                           shuffle_seed=seed)

    # -- validation ---------------------------------------------------------

    def validate(self, need_data=False):
        for name in ("epochs", "batch_size", "trials"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(name, "must be a positive integer")
        if not isinstance(self.layer_sizes, (list, tuple)) or len(self.layer_sizes) < 2:
            raise ConfigError("layer_sizes", "need at least an input and an output size")
        thetas = self.theta_d if isinstance(self.theta_d, (list, tuple)) else [self.theta_d]
        for t in thetas:
            try:
                parse_theta(t)
            except ValueError:
                raise ConfigError("theta_d", f"must be >= 0 or 'inf', got {t!r}") from None
        for name in ("tau_s", "tau_r", "theta_u", "sample_time_ms", "init_rate"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(name, "must be a positive number")
        for name in ("learning_rate_weights", "learning_rate_delays"):
            if not isinstance(getattr(self, name), (int, float)) or getattr(self, name) < 0:
                raise ConfigError(name, "must be a non-negative number")
        try:
            self.network_spec()
            self.train_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError("network", str(exc)) from None
        if need_data:
            if not self.train_data:
                raise ConfigError("train_data", "dataset path is required")
            for name in ("train_data", "test_data"):
                p = getattr(self, name)
                if p is not None and not Path(p).exists():
                    raise ConfigError(name, f"path does not exist: {p}")
        return self


def parse_theta(value):
    if isinstance(value, str):
        v = value.strip().lower().lstrip("+")
        if v in ("inf", "infinity"):
            return math.inf
        value = float(v)
    value = float(value)
    if not value >= 0:
        raise ValueError(f"theta_d must be >= 0, got {value}")
    return value


def _json_theta(t):
    t = parse_theta(t)
    return "inf" if math.isinf(t) else t


__all__ = ["ConfigError", "PROFILES", "RunConfig", "parse_theta", "format_theta"]
