"""Rectified axonal delay: clamped per-neuron shift of a spike train and its gradient."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def clamp_delay(d, theta_d):
    """Rectify a delay into ``[0, theta_d]``; ``theta_d`` may be ``inf``.

    Works elementwise on arrays and returns a float for scalar input.
    """
    if np.any(np.asarray(theta_d) < 0):
        raise ValueError("theta_d must be non-negative")
    out = np.minimum(np.maximum(d, 0.0), theta_d)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class DelayState:
    """Trainable raw delays (ms) of one layer and their rectification bound."""

    raw_delays: np.ndarray
    theta_d: float = math.inf

    def __post_init__(self):
        self.raw_delays = np.asarray(self.raw_delays, dtype=np.float64)
        self.theta_d = float(self.theta_d)
        if self.theta_d < 0:
            raise ValueError("theta_d must be non-negative")

    @classmethod
    def zeros(cls, neurons, theta_d=math.inf):
        return cls(np.zeros(neurons), theta_d)

    @property
    def clamped_delays(self):
        return clamp_delay(self.raw_delays, self.theta_d)

    @property
    def trainable(self):
        return self.theta_d > 0

    def copy(self):
        return DelayState(self.raw_delays.copy(), self.theta_d)


def _delays(state):
    return state.clamped_delays if isinstance(state, DelayState) else np.asarray(state, float)


def delay_steps(state, sample_time_ms=1.0):
    """Integer shift per neuron: clamped delay rounded half-up to the nearest bin."""
    return np.floor(_delays(state) / sample_time_ms + 0.5).astype(np.int64)


def shift_spikes(spikes, state, sample_time_ms=1.0):
    """Delay each neuron's spike train by its rounded clamped delay.

    ``out[..., i, n] = spikes[..., i, n - k_i]``; spikes pushed past the last
    step are dropped.
    """
    x = np.asarray(spikes, dtype=np.float64)
    steps = delay_steps(state, sample_time_ms)
    if steps.shape != (x.shape[-2],):
        raise ValueError(f"{x.shape[-2]} neurons but {steps.shape} delays")
    n_steps = x.shape[-1]
    if not steps.any():
        return x.copy()
    out = np.zeros_like(x)
    for i, k in enumerate(steps):
        if k < n_steps:
            out[..., i, k:] = x[..., i, : n_steps - k]
    return out


def unshift_gradient(grad, state, sample_time_ms=1.0):
    """Adjoint of :func:`shift_spikes` with respect to the unshifted spikes."""
    g = np.asarray(grad, dtype=np.float64)
    steps = delay_steps(state, sample_time_ms)
    n_steps = g.shape[-1]
    if not steps.any():
        return g.copy()
    out = np.zeros_like(g)
    for i, k in enumerate(steps):
        if k < n_steps:
            out[..., i, : n_steps - k] = g[..., i, k:]
    return out


def _fraction(state, sample_time_ms):
    x = _delays(state) / sample_time_ms
    k = np.floor(x).astype(np.int64)
    return k, x - k


def shift_spikes_fractional(spikes, state, sample_time_ms=1.0):
    """Linear-interpolation shift, differentiable in the delay between grid points.

    ``out[n] = (1 - f) x[n - k] + f x[n - k - 1]`` where ``d / T_s = k + f``.
    """
    x = np.asarray(spikes, dtype=np.float64)
    ks, fs = _fraction(state, sample_time_ms)
    n_steps = x.shape[-1]
    out = np.zeros_like(x)
    for i, (k, f) in enumerate(zip(ks, fs)):
        if k < n_steps:
            out[..., i, k:] += (1.0 - f) * x[..., i, : n_steps - k]
        if k + 1 < n_steps:
            out[..., i, k + 1:] += f * x[..., i, : n_steps - k - 1]
    return out


def unshift_gradient_fractional(grad, state, sample_time_ms=1.0):
    g = np.asarray(grad, dtype=np.float64)
    ks, fs = _fraction(state, sample_time_ms)
    n_steps = g.shape[-1]
    out = np.zeros_like(g)
    for i, (k, f) in enumerate(zip(ks, fs)):
        if k < n_steps:
            out[..., i, : n_steps - k] += (1.0 - f) * g[..., i, k:]
        if k + 1 < n_steps:
            out[..., i, : n_steps - k - 1] += f * g[..., i, k + 1:]
    return out


def fractional_delay_derivative(spikes, grad, state, sample_time_ms=1.0):
    """Exact ``dL/dd`` of the interpolated shift, ``sum_n g[n] (x[n-k-1] - x[n-k]) / T_s``."""
    x = np.asarray(spikes, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    ks, _ = _fraction(state, sample_time_ms)
    n_steps = x.shape[-1]
    out = np.zeros(x.shape[:-1])
    for i, k in enumerate(ks):
        if k < n_steps:
            out[..., i] -= np.sum(g[..., i, k:] * x[..., i, : n_steps - k], axis=-1)
        if k + 1 < n_steps:
            out[..., i] += np.sum(g[..., i, k + 1:] * x[..., i, : n_steps - k - 1], axis=-1)
    return out / sample_time_ms


def delay_gradient(shifted, upstream_grad, sample_time_ms=1.0):
    """Spike-difference delay gradient.

    ``grad[i] = T_s * sum_m (s[i, m] - s[i, m-1]) / T_s * upstream[i, m]`` with
    ``s[i, -1] = 0``, where ``upstream[i, m]`` already holds the loss
    gradient w.r.t. the shifted spike ``s[i, m]`` summed over all later
    loss instants. Only the time axis is reduced.

    Note the backward-difference estimates the slope of the spike train in
    time; moving a spike later is the opposite direction, so the derivative
    of the loss with respect to the delay is ``-delay_gradient(...)``
    (see :func:`loss_delay_derivative`).
    """
    s = np.asarray(shifted, dtype=np.float64)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if s.shape != g.shape:
        raise ValueError(f"shape mismatch {s.shape} vs {g.shape}")
    diff = np.diff(s, axis=-1, prepend=0.0) / sample_time_ms
    return sample_time_ms * np.sum(diff * g, axis=-1)


def loss_delay_derivative(shifted, upstream_grad, sample_time_ms=1.0):
    """Descent direction for the raw delays: ``-delay_gradient / T_s``."""
    return -delay_gradient(shifted, upstream_grad, sample_time_ms) / sample_time_ms


def rectified_gradient(state, grad):
    """Drop gradient components that would push a raw delay further outside ``[0, theta_d]``.

    Inside the interval the gradient passes straight through the clamp.
    Outside it only the inward component survives, so raw delays cannot
    drift arbitrarily far past a bound and stay recoverable.
    """
    grad = np.asarray(grad, dtype=np.float64)
    raw = state.raw_delays
    outward = ((raw <= 0.0) & (grad > 0.0)) | ((raw >= state.theta_d) & (grad < 0.0))
    return np.where(outward, 0.0, grad)


def apply_delay_update(state, grad, step_size):
    """Plain gradient step on the raw delays; the clamp is re-applied on read."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.raw_delays.shape:
        raise ValueError("gradient shape does not match delays")
    return DelayState(state.raw_delays - step_size * grad, state.theta_d)
