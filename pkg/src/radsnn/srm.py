"""Fully connected Spike Response Model layer: forward dynamics and reverse-mode gradients.

Arrays are laid out ``[..., neurons, steps]``; any leading axes are treated
as a batch. Two spike nonlinearities are supported: the binary Heaviside used
for training (gradients via a surrogate derivative) and a sigmoid relaxation
(``smooth_slope``) whose exact derivative is used instead, which makes the
whole network differentiable for finite-difference checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .delay import DelayState
from .kernels import causal_convolve, causal_correlate

EXPONENTIAL = "exponential"
FAST_SIGMOID = "fast-sigmoid"


@dataclass(frozen=True)
class SurrogateConfig:
    kind: str = EXPONENTIAL
    scale: float = 1.0       # alpha
    sharpness: float = 1.0   # beta

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, FAST_SIGMOID):
            raise ValueError(f"unknown surrogate kind {self.kind!r}")
        if not (self.scale > 0 and self.sharpness > 0):
            raise ValueError("surrogate scale and sharpness must be positive")


def surrogate_derivative(membrane, theta_u, cfg=SurrogateConfig()):
    """Stand-in for the Heaviside derivative at ``membrane``.

    exponential:  ``(1 / alpha) * exp(-beta * |u - theta_u| / theta_u)``
    fast-sigmoid: ``beta / (2 * (1 + beta * |u - theta_u|) ** 2)``
    """
    dist = np.abs(np.asarray(membrane, dtype=np.float64) - theta_u)
    if cfg.kind == EXPONENTIAL:
        return np.exp(-cfg.sharpness * dist / theta_u) / cfg.scale
    return cfg.sharpness / (2.0 * (1.0 + cfg.sharpness * dist) ** 2)


def smooth_spike(membrane, theta_u, slope):
    """Sigmoid relaxation of the Heaviside with derivative ``slope`` at threshold."""
    return 1.0 / (1.0 + np.exp(-4.0 * slope * (membrane - theta_u)))


@dataclass
class SrmLayerParams:
    """Weights ``[out, in]`` of one layer plus its optional axonal delay state."""

    weights: np.ndarray
    delay: DelayState | None = None

    @property
    def has_delay(self) -> bool:
        return self.delay is not None

    @property
    def delays(self):
        return None if self.delay is None else self.delay.raw_delays

    @property
    def shape(self):
        return self.weights.shape


@dataclass
class LayerForwardRecord:
    input_response: np.ndarray   # epsilon * input, [..., in, N]
    psp: np.ndarray              # [..., out, N]
    membrane: np.ndarray         # [..., out, N]
    spikes: np.ndarray           # [..., out, N], before any delay shift
    smooth_slope: float | None = field(default=None)


def forward(input_spikes, params, response, refractory, theta_u, smooth_slope=None):
    """Simulate the layer over the whole window.

    ``u[i, n] = psp[i, n] + sum_{m < n} s[i, m] * nu[n - m]`` with
    ``psp = W @ (epsilon * input)`` and ``s[i, n] = H(u[i, n] - theta_u)``,
    ``H(0) = 1``. The refractory term is driven by the neuron's own spikes,
    so time steps are resolved sequentially.
    """
    x = np.asarray(input_spikes, dtype=np.float64)
    w = params.weights if isinstance(params, SrmLayerParams) else np.asarray(params)
    if x.shape[-2] != w.shape[1]:
        raise ValueError(f"input has {x.shape[-2]} channels, layer expects {w.shape[1]}")
    a = causal_convolve(x, response)
    psp = np.matmul(w, a)
    u, s = integrate(psp, refractory, theta_u, smooth_slope)
    return LayerForwardRecord(a, psp, u, s, smooth_slope)


def integrate(psp, refractory, theta_u, smooth_slope=None):
    """Add self-refractory feedback to ``psp`` step by step; returns ``(membrane, spikes)``."""
    u = np.array(psp, dtype=np.float64)
    s = np.zeros_like(u)
    nu = refractory.samples
    k_max = len(nu)
    n_steps = u.shape[-1]
    for n in range(n_steps):
        un = u[..., n]
        if smooth_slope is None:
            sn = (un >= theta_u).astype(np.float64)
            if not sn.any():
                continue
        else:
            sn = smooth_spike(un, theta_u, smooth_slope)
        s[..., n] = sn
        end = min(n_steps, n + k_max)
        if end > n + 1:
            u[..., n + 1:end] += sn[..., None] * nu[1:end - n]
    return u, s


def backward(record, grad_spikes, params, response, refractory, theta_u,
             cfg=SurrogateConfig(), detach_refractory=False):
    """Reverse pass of :func:`forward`.

    Parameters
    ----------
    record : LayerForwardRecord
    grad_spikes : ndarray ``[..., out, N]``
        Gradient of the loss with respect to this layer's (unshifted) spikes,
        from downstream consumers only.

    Returns
    -------
    grad_weights : ndarray ``[out, in]``, summed over any batch axes.
    grad_input : ndarray ``[..., in, N]``, gradient w.r.t. the input spikes.

    The spike nonlinearity contributes the surrogate derivative (binary mode)
    or the exact sigmoid derivative (smoothed mode). Unless
    ``detach_refractory`` is set, gradients also flow backward in time
    through each neuron's refractory self-coupling.
    """
    w = params.weights if isinstance(params, SrmLayerParams) else np.asarray(params)
    g = np.asarray(grad_spikes, dtype=np.float64)
    u = record.membrane
    if g.shape != u.shape:
        raise ValueError(f"gradient shape {g.shape} != layer output shape {u.shape}")
    if record.smooth_slope is None:
        dsdu = surrogate_derivative(u, theta_u, cfg)
    else:
        s = record.spikes
        dsdu = 4.0 * record.smooth_slope * s * (1.0 - s)

    if detach_refractory:
        du = g * dsdu
    else:
        nu = refractory.samples
        k_max = len(nu)
        n_steps = u.shape[-1]
        du = np.zeros_like(u)
        for n in range(n_steps - 1, -1, -1):
            end = min(n_steps, n + k_max)
            ds = g[..., n]
            if end > n + 1:
                ds = ds + du[..., n + 1:end] @ nu[1:end - n]
            du[..., n] = ds * dsdu[..., n]

    a = record.input_response
    du2 = du.reshape(-1, *du.shape[-2:])
    a2 = a.reshape(-1, *a.shape[-2:])
    grad_w = np.matmul(du2, a2.transpose(0, 2, 1)).sum(axis=0)
    grad_input = causal_correlate(np.matmul(w.T, du), response)
    return grad_w, grad_input


def init_weights(rng, out_neurons, in_neurons, theta_u, input_rate):
    """Uniform weights in ``[-c, c]``, ``c = theta_u / (input_rate * in_neurons)``.

    ``input_rate`` is the expected spike count per input neuron per step.
    """
    c = theta_u / (input_rate * in_neurons)
    return rng.uniform(-c, c, size=(out_neurons, in_neurons))
