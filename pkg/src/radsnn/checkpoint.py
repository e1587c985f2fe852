"""Versioned binary checkpoints.

Layout (little-endian)::

    magic "RADC" | version u16
    repeated sections: name_len u16 | name utf-8 | payload_len u64 | payload

Sections: ``spec`` (JSON network spec, optimizer config, seeds and any extra
metadata), ``weight/<l>`` and ``delay/<l>`` (u32 dims then f64 row-major
data; delays are the raw, pre-clamp values), ``optim`` (JSON step counter)
and ``m/<param>`` / ``v/<param>`` Adam moments.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .delay import DelayState
from .loss import Optimizer, OptimizerConfig
from .network import Network, NetworkSpec
from .srm import SrmLayerParams

MAGIC = b"RADC"
VERSION = 1


class CheckpointError(ValueError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


def _array_payload(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    dims = struct.pack(f"<B{a.ndim}I", a.ndim, *a.shape)
    return dims + a.tobytes()


def _parse_array(payload, name):
    ndim = payload[0]
    shape = struct.unpack_from(f"<{ndim}I", payload, 1)
    start = 1 + 4 * ndim
    expected = start + 8 * int(np.prod(shape, dtype=np.int64))
    if len(payload) != expected:
        raise CheckpointError(f"section {name}: {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f8", offset=start).reshape(shape).astype(np.float64)


def save_checkpoint(net, path, optimizer=None, metadata=None):
    sections = []
    meta = {"network": net.spec.to_dict(),
            "optimizer": asdict(optimizer.config) if optimizer else None,
            "metadata": metadata or {}}
    sections.append(("spec", json.dumps(meta, sort_keys=True).encode()))
    for l, layer in enumerate(net.layers):
        sections.append((f"weight/{l}", _array_payload(layer.weights)))
        if layer.has_delay:
            sections.append((f"delay/{l}", _array_payload(layer.delay.raw_delays)))
    if optimizer is not None:
        sections.append(("optim", json.dumps({"t": optimizer.t}).encode()))
        for name in sorted(optimizer.m):
            sections.append((f"m/{name}", _array_payload(optimizer.m[name])))
            sections.append((f"v/{name}", _array_payload(optimizer.v[name])))
    blob = bytearray(MAGIC + struct.pack("<H", VERSION))
    for name, payload in sections:
        raw = name.encode()
        blob += struct.pack("<H", len(raw)) + raw + struct.pack("<Q", len(payload)) + payload
    Path(path).write_bytes(bytes(blob))
    return Path(path)


def _read_sections(blob):
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}")
    if len(blob) < 6:
        raise CheckpointError("truncated header")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos, out = 6, {}
    while pos < len(blob):
        try:
            (n,) = struct.unpack_from("<H", blob, pos)
            name = blob[pos + 2:pos + 2 + n].decode()
            (size,) = struct.unpack_from("<Q", blob, pos + 2 + n)
        except struct.error as exc:
            raise CheckpointError(f"truncated section header at offset {pos}") from exc
        start = pos + 2 + n + 8
        if start + size > len(blob):
            raise CheckpointError(f"section {name!r} truncated at offset {start}")
        out[name] = blob[start:start + size]
        pos = start + size
    return out


def load_checkpoint(path, layer_sizes=None):
    """Restore ``(network, optimizer or None, metadata)``.

    ``layer_sizes``, when given, must match the stored architecture;
    otherwise :class:`ShapeMismatchError` is raised.
    """
    sec = _read_sections(Path(path).read_bytes())
    if "spec" not in sec:
        raise CheckpointError("missing spec section")
    meta = json.loads(sec["spec"].decode())
    spec = NetworkSpec.from_dict(meta["network"])
    if layer_sizes is not None and tuple(layer_sizes) != spec.layer_sizes:
        raise ShapeMismatchError(
            f"checkpoint layer sizes {list(spec.layer_sizes)} != expected {list(layer_sizes)}")
    net = Network.build(spec)
    for l, layer in enumerate(net.layers):
        w = _parse_array(sec[f"weight/{l}"], f"weight/{l}")
        if w.shape != layer.weights.shape:
            raise ShapeMismatchError(f"layer {l} weights {w.shape} != {layer.weights.shape}")
        delay = None
        if layer.has_delay:
            d = _parse_array(sec[f"delay/{l}"], f"delay/{l}")
            if d.shape != layer.delay.raw_delays.shape:
                raise ShapeMismatchError(f"layer {l} delays {d.shape} != {layer.delay.raw_delays.shape}")
            delay = DelayState(d, layer.delay.theta_d)
        net.layers[l] = SrmLayerParams(w, delay)
    optimizer = None
    if meta.get("optimizer") is not None:
        optimizer = Optimizer(OptimizerConfig(**meta["optimizer"]))
        if "optim" in sec:
            optimizer.t = json.loads(sec["optim"].decode())["t"]
        params = net.parameters()
        for name in sec:
            if name.startswith("m/") or name.startswith("v/"):
                pname = name[2:]
                arr = _parse_array(sec[name], name)
                if pname not in params or params[pname].shape != arr.shape:
                    raise ShapeMismatchError(f"optimizer moment {name} does not match parameters")
                (optimizer.m if name[0] == "m" else optimizer.v)[pname] = arr
    return net, optimizer, meta.get("metadata", {})
