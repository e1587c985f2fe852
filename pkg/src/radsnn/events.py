"""Event streams: validation, file I/O, rasterization and a synthetic timing task.

Binary event files (``.rade``) are little-endian::

    magic "RADE" | version u16 = 1 | channel_count u16 | duration_ms f32 | label u16 | event_count u32
    event_count x { channel u16 | time_ms f32 | polarity u8 }

CSV files hold one ``channel,time_ms,polarity`` triple per line with an
optional header; the label is taken from a ``_label<K>`` filename suffix.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

MAGIC = b"RADE"
VERSION = 1
_HEADER = struct.Struct("<4sHHfHI")
_RECORD = np.dtype([("channel", "<u2"), ("time", "<f4"), ("polarity", "u1")])
_LABEL_RE = re.compile(r"_label(\d+)$")


class EventParseError(ValueError):
    """Malformed event file; ``offset`` is a byte offset (binary) or 1-based line number (csv)."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at {'offset' if isinstance(offset, int) else ''}{offset})")
        self.offset = offset


class Event(NamedTuple):
    channel: int
    time: float
    polarity: int


class EventStream:
    """Time-ordered events of one labelled sample, stored column-wise."""

    def __init__(self, channel, time, polarity, channel_count, duration_ms, label=0):
        self.channel = np.asarray(channel, dtype=np.int64).reshape(-1)
        self.time = np.asarray(time, dtype=np.float64).reshape(-1)
        self.polarity = np.asarray(polarity, dtype=np.int64).reshape(-1)
        self.channel_count = int(channel_count)
        self.duration_ms = float(duration_ms)
        self.label = int(label)
        self._validate()

    @classmethod
    def from_events(cls, events, channel_count, duration_ms, label=0):
        events = list(events)
        cols = list(zip(*events)) if events else ([], [], [])
        return cls(cols[0], cols[1], cols[2], channel_count, duration_ms, label)

    def _validate(self):
        n = len(self.time)
        if not (len(self.channel) == len(self.polarity) == n):
            raise ValueError("channel, time and polarity columns differ in length")
        if self.channel_count <= 0:
            raise ValueError("channel_count must be positive")
        if not self.duration_ms > 0:
            raise ValueError("duration_ms must be positive")
        if self.label < 0:
            raise ValueError("label must be non-negative")
        if n == 0:
            return
        if np.any(self.time < 0) or not np.all(np.isfinite(self.time)):
            raise ValueError("event times must be finite and non-negative")
        if np.any(self.time >= self.duration_ms):
            raise ValueError("event time beyond stream duration")
        if np.any(self.channel < 0) or np.any(self.channel >= self.channel_count):
            raise ValueError("event channel outside [0, channel_count)")
        if np.any((self.polarity != 0) & (self.polarity != 1)):
            raise ValueError("polarity must be 0 or 1")
        if np.any(np.diff(self.time) < 0):
            raise ValueError("events must be sorted by time")

    def __len__(self):
        return len(self.time)

    def events(self):
        return [Event(int(c), float(t), int(p))
                for c, t, p in zip(self.channel, self.time, self.polarity)]

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.channel_count == other.channel_count
                and self.duration_ms == other.duration_ms
                and self.label == other.label
                and np.array_equal(self.channel, other.channel)
                and np.array_equal(self.time, other.time)
                and np.array_equal(self.polarity, other.polarity))

    def __repr__(self):
        return (f"EventStream({len(self)} events, channels={self.channel_count}, "
                f"duration_ms={self.duration_ms}, label={self.label})")


@dataclass(frozen=True)
class SpikeRaster:
    """Binary spike raster ``data[neuron, step]`` sampled every ``sample_time_ms``."""

    data: np.ndarray
    sample_time_ms: float = 1.0

    @property
    def neurons(self):
        return self.data.shape[0]

    @property
    def steps(self):
        return self.data.shape[-1]


def window_steps(duration_ms, sample_time_ms):
    """Number of samples ``N_s`` covering ``[0, duration]`` so that ``T = (N_s - 1) T_s``."""
    return int(math.floor(duration_ms / sample_time_ms)) + 1


def rasterize(stream, sample_time_ms=1.0, split_polarity=False, steps=None):
    """Bin a stream into a binary :class:`SpikeRaster`.

    Event times are rounded half-up to the nearest bin; several events in a bin
    collapse to one spike. With ``split_polarity`` the raster has
    ``2 * channel_count`` rows and row ``polarity * channel_count + channel``.
    ``steps`` pads the window beyond ``N_s`` (never shortens it).
    """
    if sample_time_ms <= 0:
        raise ValueError("sample_time_ms must be positive")
    n_steps = window_steps(stream.duration_ms, sample_time_ms)
    if steps is not None:
        if steps < n_steps:
            raise ValueError(f"steps={steps} shorter than the stream window {n_steps}")
        n_steps = steps
    rows = stream.channel_count * (2 if split_polarity else 1)
    data = np.zeros((rows, n_steps), dtype=np.float64)
    if len(stream):
        bins = np.floor(stream.time / sample_time_ms + 0.5).astype(np.int64)
        if bins.max() >= n_steps:
            raise ValueError(f"event bin {bins.max()} out of range for {n_steps} steps")
        row = stream.channel + (stream.polarity * stream.channel_count if split_polarity else 0)
        data[row, bins] = 1.0
    return SpikeRaster(data, float(sample_time_ms))


def rasterize_all(streams, sample_time_ms=1.0, split_polarity=False):
    """Rasterize a list of streams onto a common window; returns ``(x[S, C, N], labels[S])``."""
    if not streams:
        raise ValueError("no streams to rasterize")
    steps = max(window_steps(s.duration_ms, sample_time_ms) for s in streams)
    x = np.stack([rasterize(s, sample_time_ms, split_polarity, steps).data for s in streams])
    y = np.array([s.label for s in streams], dtype=np.int64)
    return x, y


# -- file I/O ---------------------------------------------------------------

def write_events(stream, path, format="canonical-binary"):
    path = Path(path)
    if format == "csv":
        lines = ["channel,time_ms,polarity"]
        lines += [f"{c},{t!r},{p}" for c, t, p in
                  zip(stream.channel.tolist(), stream.time.tolist(), stream.polarity.tolist())]
        path.write_text("\n".join(lines) + "\n")
        return path
    if format != "canonical-binary":
        raise ValueError(f"unknown event format {format!r}")
    header = _HEADER.pack(MAGIC, VERSION, stream.channel_count, stream.duration_ms,
                          stream.label, len(stream))
    rec = np.empty(len(stream), dtype=_RECORD)
    rec["channel"] = stream.channel
    rec["time"] = stream.time
    rec["polarity"] = stream.polarity
    path.write_bytes(header + rec.tobytes())
    return path


def _sorted_stream(channel, time, polarity, channel_count, duration_ms, label):
    order = np.argsort(time, kind="stable")
    return EventStream(np.asarray(channel)[order], np.asarray(time)[order],
                       np.asarray(polarity)[order], channel_count, duration_ms, label)


def _load_binary(path):
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise EventParseError("truncated header", len(blob))
    magic, version, channels, duration, label, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise EventParseError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise EventParseError(f"unsupported version {version}", 4)
    need = _HEADER.size + count * _RECORD.itemsize
    if len(blob) < need:
        complete = (len(blob) - _HEADER.size) // _RECORD.itemsize
        raise EventParseError(f"truncated record {complete} of {count}",
                              _HEADER.size + complete * _RECORD.itemsize)
    if len(blob) > need:
        raise EventParseError("trailing bytes after last record", need)
    rec = np.frombuffer(blob, dtype=_RECORD, count=count, offset=_HEADER.size)
    try:
        return _sorted_stream(rec["channel"], rec["time"].astype(np.float64), rec["polarity"],
                              channels, float(np.float32(duration)), label)
    except ValueError as exc:
        raise EventParseError(str(exc), _HEADER.size) from exc


def label_from_filename(path):
    m = _LABEL_RE.search(Path(path).stem)
    return int(m.group(1)) if m else 0


def _load_csv(path, channel_count=None, duration_ms=None):
    chans, times, pols = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if lineno == 1 and not parts[0].strip().lstrip("-").isdigit():
                continue  # header
            try:
                if len(parts) != 3:
                    raise ValueError("expected 3 fields")
                chans.append(int(parts[0]))
                times.append(float(parts[1]))
                pols.append(int(parts[2]))
            except ValueError as exc:
                raise EventParseError(f"malformed csv line: {exc}", f"line {lineno}") from None
    if channel_count is None:
        channel_count = max(chans) + 1 if chans else 1
    if duration_ms is None:
        duration_ms = math.floor(max(times)) + 1.0 if times else 1.0
    return _sorted_stream(chans, times, pols, channel_count, duration_ms,
                          label_from_filename(path))


def load_events(path, format=None, channel_count=None, duration_ms=None):
    """Load an event file, sorting events by time if needed.

    ``format`` is ``"canonical-binary"`` or ``"csv"``; when omitted it is
    inferred from the suffix (``.csv`` or anything else for binary).
    ``channel_count`` / ``duration_ms`` only apply to csv, which does not
    carry them; defaults are inferred from the data.
    """
    if format is None:
        format = "csv" if str(path).endswith(".csv") else "canonical-binary"
    if format == "csv":
        return _load_csv(path, channel_count, duration_ms)
    if format == "canonical-binary":
        return _load_binary(path)
    raise ValueError(f"unknown event format {format!r}")


def load_dataset(directory):
    """Load every ``.rade``/``.csv`` file of a directory in sorted name order."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix in (".rade", ".csv"))
    if not files:
        raise FileNotFoundError(f"no event files in {directory}")
    return [load_events(p) for p in files]


# -- synthetic timing task --------------------------------------------------

def synth_temporal_task(class_count, channel_count, samples_per_class, seed, *,
                        template_seed=0, duration_ms=120.0, group_count=None,
                        slot_gap_ms=30.0, onset_ms=10.0, spikes_per_channel=2,
                        burst_gap_ms=2.0, jitter_ms=1.0):
    """Classes that differ only in the temporal order of fixed channel groups.

    Channels are split into ``group_count`` groups by a partition drawn from
    ``template_seed``. Each class fires the groups in its own order, one group
    per onset slot ``onset_ms + k * slot_gap_ms``; every channel emits a burst
    of ``spikes_per_channel`` spikes with Gaussian jitter. Per-channel counts
    and the set of co-active channels are identical across classes, so neither
    spike counts nor coincidences within a slot reveal the label: only the
    relative timing between groups does. ``seed`` drives the jitter; samples
    are interleaved by class, ``[c0, c1, ..., c0, c1, ...]``.
    """
    if class_count < 2 or channel_count < 2:
        raise ValueError("need at least 2 classes and 2 channels")
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be positive")
    if group_count is None:
        group_count = 2
        while math.factorial(group_count) < class_count:
            group_count += 1
    if math.factorial(group_count) < class_count or group_count > channel_count:
        raise ValueError(f"{group_count} groups cannot encode {class_count} classes")
    last = onset_ms + (group_count - 1) * slot_gap_ms + (spikes_per_channel - 1) * burst_gap_ms
    if last + 4 * jitter_ms >= duration_ms - 1.0:
        raise ValueError("template does not fit in duration_ms")

    trng = np.random.default_rng(template_seed)
    group = (np.arange(channel_count) % group_count)[trng.permutation(channel_count)]
    orders = [tuple(range(group_count)), tuple(reversed(range(group_count)))]
    while len(orders) < class_count:
        p = tuple(trng.permutation(group_count).tolist())
        if p not in orders:
            orders.append(p)
    # slot_of[c, g]: onset slot of group g in class c
    slot_of = np.argsort(np.array(orders[:class_count]), axis=1)

    rng = np.random.default_rng(seed)
    burst = np.arange(spikes_per_channel) * burst_gap_ms
    ch = np.repeat(np.arange(channel_count), spikes_per_channel)
    streams = []
    for _ in range(samples_per_class):
        for label in range(class_count):
            onset = onset_ms + slot_of[label][group] * slot_gap_ms
            t = onset[:, None] + burst[None, :]
            t = t + rng.normal(0.0, jitter_ms, size=t.shape)
            t = np.clip(t, 0.0, duration_ms - 1.0)
            # f32 so binary files round-trip exactly
            t = t.astype(np.float32).astype(np.float64).ravel()
            streams.append(_sorted_stream(ch, t, np.zeros_like(ch), channel_count,
                                          duration_ms, label))
    return streams
