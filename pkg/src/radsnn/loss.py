"""Spike-count loss, desired-count targets, readout and optimizers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Reference targets: desired spike counts over a 300-step window.
REFERENCE_WINDOW = 300
REFERENCE_TRUE = 60
REFERENCE_FALSE = 10


@dataclass(frozen=True)
class TargetSpec:
    true_class_count: int
    false_class_count: int
    window_steps: int

    def __post_init__(self):
        if self.true_class_count <= 0 or self.false_class_count < 0:
            raise ValueError("target counts must be non-negative (true count positive)")
        if self.true_class_count <= self.false_class_count:
            raise ValueError("true_class_count must exceed false_class_count")

    @classmethod
    def scaled(cls, window_steps, true_count=REFERENCE_TRUE, false_count=REFERENCE_FALSE,
               reference_window=REFERENCE_WINDOW):
        """Reference counts rescaled in proportion to the window length."""
        r = window_steps / reference_window
        t = max(1, int(round(true_count * r)))
        f = min(t - 1, int(round(false_count * r)))
        return cls(t, f, int(window_steps))

    def counts(self, label, classes):
        """Desired count vector(s); ``label`` may be an int or an array of labels."""
        label = np.asarray(label)
        if np.any(label < 0) or np.any(label >= classes):
            raise ValueError(f"label out of range for {classes} output neurons")
        onehot = np.arange(classes) == label[..., None]
        return np.where(onehot, float(self.true_class_count), float(self.false_class_count))


def spike_counts(output_spikes):
    return np.asarray(output_spikes, dtype=np.float64).sum(axis=-1)


def count_loss(output_spikes, target, label):
    """Sum over output neurons of ``(desired_count - actual_count) ** 2``.

    Batched input ``[..., classes, N]`` with matching labels gives one loss per sample.
    """
    actual = spike_counts(output_spikes)
    desired = target.counts(label, actual.shape[-1])
    out = np.sum((desired - actual) ** 2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def count_loss_gradient(output_spikes, target, label):
    """``dL/ds[i, n] = -2 (desired_i - actual_i)``, constant along time."""
    s = np.asarray(output_spikes, dtype=np.float64)
    actual = s.sum(axis=-1)
    desired = target.counts(label, actual.shape[-1])
    return np.broadcast_to((-2.0 * (desired - actual))[..., None], s.shape).copy()


def classify(output_spikes):
    """Index of the neuron with the most spikes; ties go to the lowest index."""
    counts = spike_counts(output_spikes)
    if counts.shape[-1] == 0:
        raise ValueError("empty output raster")
    out = np.argmax(counts, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def silent(output_spikes):
    """True where the output layer produced no spike at all."""
    return spike_counts(output_spikes).sum(axis=-1) == 0


# -- optimizers -------------------------------------------------------------

SGD = "sgd"
ADAM = "adam"


@dataclass(frozen=True)
class OptimizerConfig:
    rule: str = ADAM
    learning_rate_weights: float = 0.01
    learning_rate_delays: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.rule not in (SGD, ADAM):
            raise ValueError(f"unknown optimizer rule {self.rule!r}")
        if self.learning_rate_weights < 0 or self.learning_rate_delays < 0:
            raise ValueError("learning rates must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")


class NonFiniteGradient(FloatingPointError):
    pass


class Optimizer:
    """SGD or Adam over a dict of named parameter arrays, updated in place.

    Names ending in ``"delay"`` use the delay learning rate. Moment buffers
    are kept per name so they can be checkpointed.
    """

    def __init__(self, config=OptimizerConfig()):
        self.config = config
        self.t = 0
        self.m = {}
        self.v = {}

    def lr(self, name):
        c = self.config
        return c.learning_rate_delays if name.endswith("delay") else c.learning_rate_weights

    def step(self, params, grads):
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                bad = np.flatnonzero(~np.isfinite(g))
                raise NonFiniteGradient(
                    f"non-finite gradient for {name} at flat indices {bad[:10].tolist()}")
            if g.shape != params[name].shape:
                raise ValueError(f"gradient shape {g.shape} != parameter {name} {params[name].shape}")
        c = self.config
        self.t += 1
        for name, g in grads.items():
            p = params[name]
            lr = self.lr(name)
            if c.rule == SGD:
                p -= lr * g
                continue
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            m_hat = m / (1.0 - c.beta1 ** self.t)
            v_hat = v / (1.0 - c.beta2 ** self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + c.epsilon)
        return params
