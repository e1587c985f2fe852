"""Command-line entry point: ``radsnn {train,eval,ablate,analyze,gradcheck,synth}``.

Exit codes: 0 success, 1 check or tolerance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import gradcheck
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, format_theta, parse_theta
from .events import (EventParseError, load_dataset, load_events, rasterize, rasterize_all,
                     synth_temporal_task, write_events)
from .network import Dataset, Network, cumulative_trace, evaluate, train

log = logging.getLogger("radsnn")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _dataset(directory, cfg):
    x, y = rasterize_all(load_dataset(directory), cfg.sample_time_ms, cfg.split_polarity)
    return Dataset(x, y)


def _check_dataset(data, cfg, field_name):
    if data.x.shape[1] != cfg.layer_sizes[0]:
        raise ConfigError(field_name, f"data has {data.x.shape[1]} channels but layer_sizes "
                                      f"starts with {cfg.layer_sizes[0]}")
    if data.y.max() >= cfg.layer_sizes[-1]:
        raise ConfigError(field_name, f"label {data.y.max()} >= output size {cfg.layer_sizes[-1]}")


def run_trials(cfg, out, theta_d=None):
    """Train one network per trial seed; write per-trial CSV/checkpoints and return the summary."""
    out.mkdir(parents=True, exist_ok=True)
    train_set = _dataset(cfg.train_data, cfg)
    _check_dataset(train_set, cfg, "train_data")
    test_set = None
    if cfg.test_data:
        test_set = _dataset(cfg.test_data, cfg)
        _check_dataset(test_set, cfg, "test_data")
    trials = []
    for k, seed in enumerate(cfg.trial_seeds()):
        net = Network.build(cfg.network_spec(seed=seed, theta_d=theta_d))
        report, opt = train(net, train_set, test_set, cfg.train_config(seed),
                            log=lambda r: log.info("trial %d %s", k, r))
        report.to_csv(out / f"trial{k}.csv")
        _dump(out / f"trial{k}_delays.json", report.histograms)
        save_checkpoint(net, out / f"trial{k}.radc", opt, {"seed": seed, "trial": k})
        final = report.final()
        acc = final["test_accuracy"] if test_set is not None else final["train_accuracy"]
        trials.append({"seed": seed, "accuracy": acc,
                       "best_epoch_accuracy": report.best_test_accuracy(),
                       "final_train_accuracy": final["train_accuracy"],
                       "final_train_loss": final["train_loss"],
                       "final_test_loss": final["test_loss"]})
    accs = np.array([t["accuracy"] for t in trials])
    spec = cfg.network_spec(theta_d=theta_d)
    summary = {
        "theta_d": [format_theta(t) for t in spec.hidden_theta_d],
        "params": spec.param_count(), "weight_params": spec.weight_count(),
        "delay_params": spec.delay_count(),
        "accuracy_metric": "test" if test_set is not None else "train",
        "best": float(accs.max()), "mean": float(accs.mean()), "std": float(accs.std()),
        "trials": trials,
    }
    _dump(out / "summary.json", summary)
    return summary


def cmd_train(cfg, args):
    cfg.validate(need_data=True)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.json")
    s = run_trials(cfg, out)
    print(f"accuracy best {s['best']:.4f} mean {s['mean']:.4f} std {s['std']:.4f} "
          f"params {s['params']}")
    return EXIT_OK


def cmd_ablate(cfg, args):
    cfg.validate(need_data=True)
    raw = args.theta_d_list or "0,inf," + str(cfg.theta_d)
    try:
        thetas = [parse_theta(t) for t in raw.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError("theta_d_list", str(exc)) from None
    if not thetas:
        raise ConfigError("theta_d_list", "list is empty")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.json")
    rows = []
    for t in thetas:
        label = format_theta(t)
        s = run_trials(cfg, out / f"theta_{label}", theta_d=t)
        rows.append([label, s["params"], s["mean"], s["std"], s["best"]])
        print(f"theta_d={label:>5} params={s['params']} accuracy {s['mean']:.4f} +- {s['std']:.4f}")
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_d", "params", "accuracy_mean", "accuracy_std", "accuracy_best"])
        w.writerows(rows)
    return EXIT_OK


def _load(args, cfg):
    if not args.checkpoint:
        raise ConfigError("checkpoint", "--checkpoint is required")
    if not Path(args.checkpoint).exists():
        raise ConfigError("checkpoint", f"path does not exist: {args.checkpoint}")
    try:
        return load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise ConfigError("checkpoint", str(exc)) from None


def cmd_eval(cfg, args):
    net, _, _ = _load(args, cfg)
    path = cfg.test_data or cfg.train_data
    if not path:
        raise ConfigError("test_data", "dataset path is required")
    if not Path(path).exists():
        raise ConfigError("test_data", f"path does not exist: {path}")
    cfg.layer_sizes = list(net.spec.layer_sizes)
    data = _dataset(path, cfg)
    _check_dataset(data, cfg, "test_data")
    res = evaluate(net, data, cfg.train_config().target(data.steps))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "eval.json", {"accuracy": res.accuracy, "mean_loss": res.mean_loss,
                              "confusion": res.confusion.tolist(), "silent": res.silent})
    print(f"accuracy {res.accuracy:.4f} mean loss {res.mean_loss:.4f}")
    return EXIT_OK


def cmd_analyze(cfg, args):
    net, _, _ = _load(args, cfg)
    if not args.sample or not Path(args.sample).exists():
        raise ConfigError("sample", f"event file not found: {args.sample}")
    try:
        stream = load_events(args.sample)
    except EventParseError as exc:
        raise ConfigError("sample", str(exc)) from None
    raster = rasterize(stream, net.spec.sample_time_ms, cfg.split_polarity).data
    classes = net.spec.classes
    if raster.shape[0] != net.spec.layer_sizes[0]:
        raise ConfigError("sample", f"sample has {raster.shape[0]} channels, network expects "
                                    f"{net.spec.layer_sizes[0]}")
    if stream.label >= classes:
        raise ConfigError("sample", f"sample label {stream.label} but network has {classes} classes")
    trace = cumulative_trace(net, raster)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    header = [f"class{c}" for c in range(classes)]
    with open(out / "cumulative.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_ms"] + header)
        for n in range(trace.counts.shape[1]):
            w.writerow([n * trace.sample_time_ms] + [int(v) for v in trace.counts[:, n]])
    with open(out / "totals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "spike_count"])
        w.writerows([c, int(v)] for c, v in enumerate(trace.totals))
    _dump(out / "decision.json", {"decision_time_ms": trace.decision_time_ms,
                                  "predicted": trace.predicted, "label": stream.label,
                                  "duration_ms": stream.duration_ms})
    print(f"predicted {trace.predicted} (label {stream.label}), "
          f"decision at {trace.decision_time_ms:g} ms")
    return EXIT_OK


def cmd_gradcheck(cfg, args):
    net, x, label = gradcheck.gradcheck_network(tuple(cfg.gradcheck_layers), cfg.gradcheck_steps,
                                                seed=cfg.seed)
    reports = gradcheck.check_gradients(net, x, label, h_values=cfg.gradcheck_h,
                                        tolerance=cfg.gradcheck_tolerance)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "gradcheck.json", [r.to_dict() for r in reports])
    status = EXIT_OK
    for r in reports:
        name, idx = r.worst
        print(f"h={r.h:g} max relative error {r.max_error:.3e} "
              f"({'pass' if r.passed else 'FAIL'}, worst {name}[{idx}])")
        if not r.passed:
            status = EXIT_CHECK
    return status


def cmd_synth(cfg, args):
    out = Path(cfg.out)
    common = dict(template_seed=cfg.synth_template_seed, duration_ms=cfg.synth_duration_ms)
    splits = {"train": (cfg.synth_train_per_class, cfg.seed),
              "test": (cfg.synth_test_per_class, cfg.seed + 1)}
    for split, (per_class, seed) in splits.items():
        d = out / split
        d.mkdir(parents=True, exist_ok=True)
        streams = synth_temporal_task(cfg.synth_classes, cfg.synth_channels, per_class, seed,
                                      **common)
        for i, s in enumerate(streams):
            write_events(s, d / f"sample{i:05d}_label{s.label}.rade")
    print(f"wrote synthetic task to {out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate,
            "analyze": cmd_analyze, "gradcheck": cmd_gradcheck, "synth": cmd_synth}


def build_parser():
    p = argparse.ArgumentParser(prog="radsnn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--profile", help="defaults profile: nmnist, dvsgesture, ntidigits, synth")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--theta-d", dest="theta_d", help="delay cap in ms or 'inf'")
        s.add_argument("--epochs", type=int)
        s.add_argument("--train-data", dest="train_data")
        s.add_argument("--test-data", dest="test_data")
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("eval", "analyze"):
            s.add_argument("--checkpoint")
        if name == "analyze":
            s.add_argument("--sample", help="event file to analyse")
        if name == "ablate":
            s.add_argument("--theta-d-list", dest="theta_d_list",
                           help="comma separated caps, e.g. 0,64,inf")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in
                 ("out", "seed", "trials", "theta_d", "epochs", "train_data", "test_data")}
    try:
        cfg = RunConfig.from_sources(args.config, args.profile, overrides)
        cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"radsnn {args.command}: config error in {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
