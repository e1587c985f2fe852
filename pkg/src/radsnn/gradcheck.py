"""Brute-force oracles: central finite differences and a literal double-sum delay gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .loss import TargetSpec, count_loss
from .network import Network, NetworkSpec

DEFAULT_H = 1e-4
H_SWEEP = (1e-3, 1e-4, 1e-5)


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)


def central_difference(f, x, h=DEFAULT_H):
    """``(f(x + h e_k) - f(x - h e_k)) / 2h`` for every entry of ``x`` (restored afterwards)."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    scalar = np.ndim(x) == 0
    x = np.array(x, dtype=np.float64, ndmin=1) if scalar else x
    grad = np.zeros(x.shape)
    for k in np.ndindex(x.shape):
        orig = x[k]
        x[k] = orig + h
        fp = f(x[0] if scalar else x)
        x[k] = orig - h
        fm = f(x[0] if scalar else x)
        x[k] = orig
        grad[k] = (fp - fm) / (2.0 * h)
    return float(grad[0]) if scalar else grad


def smoothed_loss(net, x, label, target, smooth_slope):
    out = net.forward(x, smooth_slope).outputs[-1]
    return float(np.sum(count_loss(out, target, label)))


def fd_gradient(net, x, label, target, h=DEFAULT_H, smooth_slope=0.02):
    """Finite-difference gradient of the smoothed loss w.r.t. every weight and raw delay."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    params = net.parameters()
    return {name: central_difference(lambda _: smoothed_loss(net, x, label, target, smooth_slope),
                                     p, h)
            for name, p in params.items()}


@dataclass
class GradCheckReport:
    h: float
    tolerance: float
    errors: dict = field(default_factory=dict)    # name -> per-entry relative error

    @property
    def max_error(self):
        return max((float(e.max()) for e in self.errors.values() if e.size), default=0.0)

    @property
    def worst(self):
        """``(parameter name, flat index)`` of the largest relative error."""
        name = max(self.errors, key=lambda k: self.errors[k].max())
        return name, int(np.argmax(self.errors[name]))

    @property
    def passed(self):
        return self.max_error < self.tolerance

    def to_dict(self):
        name, idx = self.worst
        return {"h": self.h, "tolerance": self.tolerance, "max_relative_error": self.max_error,
                "passed": self.passed, "worst_parameter": name, "worst_index": idx,
                "relative_errors": {k: v.ravel().tolist() for k, v in self.errors.items()}}


def check_gradients(net, x, label, target=None, h_values=H_SWEEP, tolerance=1e-4,
                    smooth_slope=0.02, include_delays=False):
    """Compare analytic smoothed-mode gradients with finite differences for each ``h``.

    Weight gradients are always checked. Delay gradients are only included on
    request and then use the exact derivative of the interpolated shift,
    because the spike-difference estimator is an approximation by design.
    """
    target = target or TargetSpec.scaled(x.shape[-1])
    _, analytic, _ = net.loss_and_gradients(x, label, target, smooth_slope,
                                            exact_fractional_delay=True)
    reports = []
    for h in h_values:
        fd = fd_gradient(net, x, label, target, h, smooth_slope)
        errs = {k: relative_error(analytic[k], fd[k]) for k in analytic
                if include_delays or not k.endswith("delay")}
        reports.append(GradCheckReport(h, tolerance, errs))
    return reports


def gradcheck_network(layer_sizes=(4, 8, 3), steps=32, seed=0, input_rate=0.25,
                      theta_d=8.0, tau=2.0):
    """Small seeded smoothed-mode test problem: a network, one input sample and its label.

    Delays are set to fractional values inside ``(0, theta_d)`` so the
    interpolated shift is exercised away from its grid-point kinks.
    """
    rng = np.random.default_rng(seed)
    spec = NetworkSpec(layer_sizes, theta_d=theta_d, tau_s=tau, tau_r=tau, seed=seed,
                       init_rate=input_rate, detach_refractory=False)
    net = Network.build(spec)
    for layer in net.layers:
        layer.weights *= 2.0
        if layer.has_delay:
            n = layer.delay.raw_delays.size
            layer.delay.raw_delays[:] = rng.integers(0, int(theta_d) - 1, n) + rng.uniform(0.2, 0.8, n)
    x = (rng.random((layer_sizes[0], steps)) < input_rate).astype(np.float64)
    label = int(rng.integers(layer_sizes[-1]))
    return net, x, label


def delay_sign_agreement(configs=200, layer_sizes=(2, 2, 2), steps=24, smooth_slope=0.02,
                         seed=0, h=DEFAULT_H, tau=5.0, min_magnitude=1e-9):
    """Fraction of delay parameters where the spike-difference estimator and finite
    differences of the smoothed loss agree in sign.

    Entries where both gradients are numerically zero are skipped.
    """
    agree = total = 0
    for c in range(configs):
        net, x, label = gradcheck_network(layer_sizes, steps, seed=seed * 100003 + c, tau=tau)
        target = TargetSpec.scaled(steps)
        _, analytic, _ = net.loss_and_gradients(x, label, target, smooth_slope)
        fd = fd_gradient(net, x, label, target, h, smooth_slope)
        for k in analytic:
            if not k.endswith("delay"):
                continue
            a, b = analytic[k], fd[k]
            keep = (np.abs(a) > min_magnitude) | (np.abs(b) > min_magnitude)
            agree += int(np.sum(np.sign(a[keep]) == np.sign(b[keep])))
            total += int(np.sum(keep))
    return agree / max(total, 1), total


def double_sum_delay_gradient(shifted, per_step_loss_grads, sample_time_ms=1.0):
    """Literal two-index evaluation of the delay gradient.

    ``per_step_loss_grads[i, n, m]`` is ``dL[n] / ds[i, m]`` for the loss at
    instant ``n`` (only ``m <= n`` contributes). Returns
    ``T_s * sum_n sum_{m <= n} (s[i, m] - s[i, m-1]) / T_s * G[i, n, m]``.
    """
    s = np.asarray(shifted, dtype=np.float64)
    G = np.asarray(per_step_loss_grads, dtype=np.float64)
    neurons, steps = s.shape
    if G.shape != (neurons, steps, steps):
        raise ValueError(f"per-step gradients must have shape {(neurons, steps, steps)}")
    ts = sample_time_ms
    grad = np.zeros(neurons)
    for n in range(steps):
        for m in range(n + 1):
            prev = s[:, m - 1] if m > 0 else 0.0
            grad += ts * ((s[:, m] - prev) / ts) * G[:, n, m]
    return grad
