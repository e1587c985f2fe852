"""Feed-forward SRM networks with rectified axonal delays on the hidden layers."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import delay as rad
from . import srm
from .kernels import REFRACTORY, RESPONSE, tabulate
from .loss import (NonFiniteGradient, Optimizer, OptimizerConfig, TargetSpec, classify,
                   count_loss, count_loss_gradient, silent)


def _theta(value):
    if isinstance(value, str):
        if value.strip().lower().lstrip("+") in ("inf", "infinity"):
            return math.inf
        value = float(value)
    value = float(value)
    if value < 0 or math.isnan(value):
        raise ValueError(f"theta_d must be >= 0 or 'inf', got {value}")
    return value


def format_theta(value):
    return "+inf" if math.isinf(value) else f"{value:g}"


@dataclass
class NetworkSpec:
    """Architecture and neuron constants; ``layer_sizes`` includes the input width."""

    layer_sizes: tuple
    theta_d: object = 64.0          # scalar or one value per hidden layer; "inf" allowed
    delays: bool = True
    tau_s: float = 5.0
    tau_r: float = 5.0
    theta_u: float = 10.0
    sample_time_ms: float = 1.0
    surrogate: srm.SurrogateConfig = field(default_factory=srm.SurrogateConfig)
    detach_refractory: bool = True
    init_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if isinstance(self.surrogate, dict):
            self.surrogate = srm.SurrogateConfig(**self.surrogate)
        if len(self.layer_sizes) < 2 or any(n <= 0 for n in self.layer_sizes):
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        hidden = len(self.layer_sizes) - 2
        if isinstance(self.theta_d, (list, tuple)):
            if len(self.theta_d) != hidden:
                raise ValueError(f"{len(self.theta_d)} theta_d values for {hidden} hidden layers")
            thetas = [_theta(t) for t in self.theta_d]
        else:
            thetas = [_theta(self.theta_d)] * hidden
        self._thetas = thetas
        if self.tau_s <= 0 or self.tau_r <= 0 or self.theta_u <= 0 or self.sample_time_ms <= 0:
            raise ValueError("time constants, threshold and sample time must be positive")
        if self.init_rate <= 0:
            raise ValueError("init_rate must be positive")

    @property
    def hidden_theta_d(self):
        return list(self._thetas)

    @property
    def classes(self):
        return self.layer_sizes[-1]

    def weight_count(self):
        s = self.layer_sizes
        return sum(a * b for a, b in zip(s[:-1], s[1:]))

    def delay_count(self):
        """Trainable delays: one per hidden neuron whose cap is positive."""
        if not self.delays:
            return 0
        return sum(n for n, t in zip(self.layer_sizes[1:-1], self._thetas) if t > 0)

    def param_count(self):
        return self.weight_count() + self.delay_count()

    def to_dict(self):
        d = asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        d["theta_d"] = [format_theta(t) if math.isinf(t) else t for t in self._thetas]
        d.pop("_thetas", None)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("_thetas", None)
        return cls(**d)


class Trace(NamedTuple):
    records: list     # LayerForwardRecord per layer
    outputs: list     # spikes leaving each layer (after the delay shift, if any)


class Network:
    def __init__(self, spec, layers):
        self.spec = spec
        self.layers = layers
        self.response = tabulate(RESPONSE, spec.tau_s, spec.theta_u, spec.sample_time_ms)
        self.refractory = tabulate(REFRACTORY, spec.tau_r, spec.theta_u, spec.sample_time_ms)

    @classmethod
    def build(cls, spec):
        """Seeded weights for every layer; zero-initialised delays on hidden layers."""
        rng = np.random.default_rng(spec.seed)
        sizes = spec.layer_sizes
        layers = []
        for l, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = srm.init_weights(rng, n_out, n_in, spec.theta_u, spec.init_rate)
            hidden = l < len(sizes) - 2
            state = rad.DelayState.zeros(n_out, spec.hidden_theta_d[l]) if hidden and spec.delays else None
            layers.append(srm.SrmLayerParams(w, state))
        return cls(spec, layers)

    # -- parameters --------------------------------------------------------

    def parameters(self):
        """Trainable arrays by name (live references)."""
        out = {}
        for l, layer in enumerate(self.layers):
            out[f"layer{l}.weight"] = layer.weights
            if layer.has_delay and layer.delay.trainable:
                out[f"layer{l}.delay"] = layer.delay.raw_delays
        return out

    def param_count(self):
        return sum(p.size for p in self.parameters().values())

    def copy(self):
        layers = [srm.SrmLayerParams(l.weights.copy(), None if l.delay is None else l.delay.copy())
                  for l in self.layers]
        return Network(self.spec, layers)

    # -- simulation --------------------------------------------------------

    def forward(self, x, smooth_slope=None):
        """Run the layer chain on ``x[..., in, N]``.

        In smoothed mode spikes are sigmoid activations and delays use the
        fractional interpolation shift; otherwise spikes are binary and delays
        are rounded to whole steps.
        """
        h = np.asarray(x, dtype=np.float64)
        records, outputs = [], []
        ts = self.spec.sample_time_ms
        for layer in self.layers:
            rec = srm.forward(h, layer, self.response, self.refractory, self.spec.theta_u,
                              smooth_slope)
            h = rec.spikes
            if layer.has_delay:
                if smooth_slope is None:
                    h = rad.shift_spikes(h, layer.delay, ts)
                else:
                    h = rad.shift_spikes_fractional(h, layer.delay, ts)
            records.append(rec)
            outputs.append(h)
        return Trace(records, outputs)

    def output_spikes(self, x):
        return self.forward(x).outputs[-1]

    def backward(self, trace, grad_output, exact_fractional_delay=False):
        """Backpropagate ``dL/d(output spikes)`` into per-parameter gradients.

        Delay gradients use the spike-difference estimator on the shifted
        train (or, with ``exact_fractional_delay`` in smoothed mode, the exact
        derivative of the interpolated shift).
        """
        spec = self.spec
        ts = spec.sample_time_ms
        smooth = trace.records[0].smooth_slope is not None
        grads = {}
        g = grad_output
        for l in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[l]
            rec = trace.records[l]
            if layer.has_delay:
                if layer.delay.trainable:
                    if smooth and exact_fractional_delay:
                        d = rad.fractional_delay_derivative(rec.spikes, g, layer.delay, ts)
                    else:
                        d = rad.loss_delay_derivative(trace.outputs[l], g, ts)
                    d = d.reshape(-1, d.shape[-1]).sum(axis=0)
                    if not smooth:
                        d = rad.rectified_gradient(layer.delay, d)
                    grads[f"layer{l}.delay"] = d
                if smooth:
                    g = rad.unshift_gradient_fractional(g, layer.delay, ts)
                else:
                    g = rad.unshift_gradient(g, layer.delay, ts)
            gw, g = srm.backward(rec, g, layer, self.response, self.refractory, spec.theta_u,
                                 spec.surrogate, spec.detach_refractory)
            grads[f"layer{l}.weight"] = gw
        return grads

    def loss_and_gradients(self, x, labels, target, smooth_slope=None,
                           exact_fractional_delay=False):
        """Summed count loss over the batch and the matching summed gradients."""
        trace = self.forward(x, smooth_slope)
        out = trace.outputs[-1]
        loss = count_loss(out, target, labels)
        grads = self.backward(trace, count_loss_gradient(out, target, labels),
                              exact_fractional_delay)
        return float(np.sum(loss)), grads, trace


# -- datasets, training and evaluation ---------------------------------------

class Dataset(NamedTuple):
    x: np.ndarray       # [S, channels, N]
    y: np.ndarray       # [S]

    def __len__(self):
        return len(self.y)

    @property
    def steps(self):
        return self.x.shape[-1]


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    true_count: int | None = None    # None: reference targets scaled to the window
    false_count: int | None = None
    shuffle_seed: int = 0
    eval_chunk: int = 64
    histogram_bins: int = 8

    def target(self, steps):
        if self.true_count is None:
            return TargetSpec.scaled(steps)
        return TargetSpec(self.true_count, self.false_count or 0, steps)


@dataclass
class EvalResult:
    accuracy: float
    mean_loss: float
    confusion: np.ndarray     # [true class, predicted class]
    silent: int               # samples with no output spike


def evaluate(net, data, target=None, chunk=64):
    """Accuracy, mean count loss and confusion matrix; parameters are not touched."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    target = target or TargetSpec.scaled(data.steps)
    classes = net.spec.classes
    conf = np.zeros((classes, classes), dtype=np.int64)
    total_loss = 0.0
    n_silent = 0
    for start in range(0, len(data), chunk):
        xb, yb = data.x[start:start + chunk], data.y[start:start + chunk]
        out = net.output_spikes(xb)
        total_loss += float(np.sum(count_loss(out, target, yb)))
        np.add.at(conf, (yb, classify(out)), 1)
        n_silent += int(np.sum(silent(out)))
    acc = float(np.trace(conf)) / len(data)
    return EvalResult(acc, total_loss / len(data), conf, n_silent)


def train_epoch(net, data, optimizer, target, batch_size=8, seed=0, epoch=0):
    """One pass over ``data`` in a seeded shuffled order; returns mean loss and accuracy.

    Gradients are averaged over each batch. Delays are re-clamped implicitly:
    the raw values are updated and every read goes through the clamp.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    order = np.random.default_rng([seed, epoch]).permutation(len(data))
    params = net.parameters()
    total_loss, correct = 0.0, 0
    for b, start in enumerate(range(0, len(order), batch_size)):
        idx = order[start:start + batch_size]
        loss, grads, trace = net.loss_and_gradients(data.x[idx], data.y[idx], target)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss} in epoch {epoch}, batch {b}, "
                                   f"samples {idx.tolist()}")
        total_loss += loss
        correct += int(np.sum(classify(trace.outputs[-1]) == data.y[idx]))
        scale = 1.0 / len(idx)
        grads = {k: v * scale for k, v in grads.items() if k in params}
        try:
            optimizer.step(params, grads)
        except NonFiniteGradient as exc:
            raise TrainingDiverged(f"epoch {epoch}, batch {b}: {exc}") from exc
    return total_loss / len(data), correct / len(data)


def delay_histograms(net, bins=8):
    """Histogram of clamped delays per hidden layer (bin edges span the observed range)."""
    out = []
    for layer in net.layers:
        if not layer.has_delay:
            continue
        d = layer.delay.clamped_delays
        hi = layer.delay.theta_d if math.isfinite(layer.delay.theta_d) else max(1.0, float(d.max()))
        counts, edges = np.histogram(d, bins=bins, range=(0.0, max(hi, 1e-9)))
        out.append({"counts": counts.tolist(), "edges": edges.tolist()})
    return out


@dataclass
class TrainReport:
    param_count: int
    weight_count: int
    delay_count: int
    rows: list = field(default_factory=list)          # per-epoch metrics
    histograms: list = field(default_factory=list)    # per epoch, per hidden layer
    wall_clock_s: list = field(default_factory=list)

    CSV_FIELDS = ("epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy",
                  "wall_clock_s")

    def best_test_accuracy(self):
        return max((r["test_accuracy"] for r in self.rows if r["test_accuracy"] is not None),
                   default=None)

    def final(self):
        return self.rows[-1] if self.rows else None

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_FIELDS)
            for r, wc in zip(self.rows, self.wall_clock_s):
                w.writerow([r["epoch"], repr(r["train_loss"]), repr(r["train_accuracy"]),
                            repr(r["test_loss"]), repr(r["test_accuracy"]), f"{wc:.3f}"])


def train(net, train_data, test_data=None, config=TrainConfig(), optimizer=None, log=None):
    """Train for ``config.epochs`` epochs, evaluating on ``test_data`` after each one."""
    target = config.target(train_data.steps)
    optimizer = optimizer or Optimizer(config.optimizer)
    spec = net.spec
    report = TrainReport(net.param_count(), spec.weight_count(), net.param_count() - spec.weight_count())
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        loss, acc = train_epoch(net, train_data, optimizer, target, config.batch_size,
                                config.shuffle_seed, epoch)
        row = {"epoch": epoch + 1, "train_loss": loss, "train_accuracy": acc,
               "test_loss": None, "test_accuracy": None}
        if test_data is not None:
            ev = evaluate(net, test_data, config.target(test_data.steps), config.eval_chunk)
            row["test_loss"], row["test_accuracy"] = ev.mean_loss, ev.accuracy
        report.rows.append(row)
        report.histograms.append(delay_histograms(net, config.histogram_bins))
        report.wall_clock_s.append(time.perf_counter() - t0)
        if log is not None:
            log(row)
    return report, optimizer


# -- cumulative output analysis -----------------------------------------------

@dataclass
class CumulativeTrace:
    counts: np.ndarray          # [classes, N] running spike counts
    decision_step: int
    sample_time_ms: float

    @property
    def decision_time_ms(self):
        return self.decision_step * self.sample_time_ms

    @property
    def totals(self):
        return self.counts[:, -1].copy()

    @property
    def predicted(self):
        return int(np.argmax(self.counts[:, -1]))


def decision_step(counts):
    """First step from which the running argmax (lowest index on ties) never changes."""
    leader = np.argmax(counts, axis=0)
    changes = np.flatnonzero(leader[1:] != leader[:-1])
    return int(changes[-1] + 1) if len(changes) else 0


def cumulative_trace(net, sample):
    """Running per-class output spike counts for one sample ``[in, N]``."""
    out = net.output_spikes(np.asarray(sample, dtype=np.float64))
    counts = np.cumsum(out, axis=-1)
    return CumulativeTrace(counts, decision_step(counts), net.spec.sample_time_ms)
