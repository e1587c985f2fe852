"""Spike response and refractory kernels, sampled tables and causal convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RESPONSE = "response"
REFRACTORY = "refractory"

# Tables are truncated once the kernel falls below this fraction of its peak.
SUPPORT_TOLERANCE = 1e-6


def eval_response(t, tau_s):
    """Spike response kernel ``(t / tau_s) * exp(1 - t / tau_s)`` for ``t >= 0``, else 0.

    Accepts scalars or arrays. The peak value is exactly 1 at ``t == tau_s``.
    """
    if tau_s <= 0:
        raise ValueError(f"tau_s must be positive, got {tau_s}")
    if np.ndim(t) == 0:
        t = float(t)
        if t < 0:
            return 0.0
        x = t / tau_s
        return x * math.exp(1.0 - x)
    t = np.asarray(t, dtype=np.float64)
    x = t / tau_s
    return np.where(t >= 0, x * np.exp(1.0 - x), 0.0)


def eval_refractory(t, tau_r, theta_u):
    """Refractory kernel ``-2 theta_u (t / tau_r) exp(1 - t / tau_r)`` for ``t >= 0``.

    Minimum value ``-2 theta_u`` sits at ``t == tau_r``.
    """
    if tau_r <= 0 or theta_u <= 0:
        raise ValueError("tau_r and theta_u must be positive")
    return -2.0 * theta_u * eval_response(t, tau_r)


def support_steps_for(tau, sample_time_ms, tolerance=SUPPORT_TOLERANCE):
    """Smallest window length n with ``|kernel(n * T_s)| < tolerance * peak`` past the peak."""
    n = max(1, int(math.ceil(tau / sample_time_ms)))
    while eval_response(n * sample_time_ms, tau) >= tolerance:
        n += 1
    return n


@dataclass(frozen=True)
class KernelTable:
    """Kernel sampled at bin starts, ``samples[n] = kernel(n * T_s)``."""

    samples: np.ndarray
    kind: str
    tau: float
    sample_time_ms: float
    _toeplitz: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def support_steps(self) -> int:
        return len(self.samples)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def matrix(self, n_steps):
        """Upper-triangular ``M[m, n] = samples[n - m]`` so that ``x @ M`` convolves causally."""
        m = self._toeplitz.get(n_steps)
        if m is None:
            m = _causal_matrix(self.samples, n_steps)
            self._toeplitz[n_steps] = m
        return m


def _causal_matrix(kern, n_steps):
    lag = np.arange(n_steps)[None, :] - np.arange(n_steps)[:, None]
    m = np.zeros((n_steps, n_steps))
    ok = (lag >= 0) & (lag < len(kern))
    m[ok] = np.asarray(kern)[lag[ok]]
    m.flags.writeable = False
    return m


def tabulate(kind, tau, theta_u=10.0, sample_time_ms=1.0, support_steps=None):
    """Precompute a :class:`KernelTable`.

    Parameters
    ----------
    kind : {"response", "refractory"}
    tau : float
        Kernel time constant in ms.
    theta_u : float
        Firing threshold; only scales the refractory kernel.
    sample_time_ms : float
        Simulation step ``T_s``.
    support_steps : int, optional
        Table length. Defaults to the shortest window meeting the truncation
        tolerance; an explicit value that is too short raises ``ValueError``.
    """
    if kind not in (RESPONSE, REFRACTORY):
        raise ValueError(f"unknown kernel kind {kind!r}")
    if sample_time_ms <= 0:
        raise ValueError("sample_time_ms must be positive")
    if support_steps is None:
        support_steps = support_steps_for(tau, sample_time_ms)
    support_steps = int(support_steps)
    if support_steps < 1:
        raise ValueError("support_steps must be positive")
    tail = eval_response(support_steps * sample_time_ms, tau)
    if support_steps * sample_time_ms < tau or tail >= SUPPORT_TOLERANCE:
        raise ValueError(
            f"support of {support_steps} steps truncates the {kind} kernel "
            f"(tail value {tail:.3g} of peak); need at least "
            f"{support_steps_for(tau, sample_time_ms)}"
        )
    t = np.arange(support_steps) * sample_time_ms
    if kind == RESPONSE:
        samples = eval_response(t, tau)
    else:
        samples = eval_refractory(t, tau, theta_u)
    samples = np.asarray(samples, dtype=np.float64)
    samples.flags.writeable = False
    return KernelTable(samples=samples, kind=kind, tau=float(tau),
                       sample_time_ms=float(sample_time_ms))


def causal_convolve(raster, table):
    """Causal convolution along the last (time) axis.

    ``out[..., n] = sum_{0 <= k < support, k <= n} samples[k] * raster[..., n - k]``.
    Leading axes (neurons, batch) are carried through unchanged.
    """
    x = np.asarray(raster, dtype=np.float64)
    if isinstance(table, KernelTable):
        return x @ table.matrix(x.shape[-1])
    return x @ _causal_matrix(table, x.shape[-1])


def causal_correlate(grad, table):
    """Adjoint of :func:`causal_convolve`: ``out[..., m] = sum_k samples[k] * grad[..., m + k]``."""
    g = np.asarray(grad, dtype=np.float64)
    if isinstance(table, KernelTable):
        return g @ table.matrix(g.shape[-1]).T
    return g @ _causal_matrix(table, g.shape[-1]).T
