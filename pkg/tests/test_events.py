import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radsnn.events import (Event, EventParseError, EventStream, load_dataset, load_events,
                           rasterize, rasterize_all, synth_temporal_task, write_events)


def stream(events, channels=2, duration=5.0, label=0):
    return EventStream.from_events(events, channels, duration, label)


class TestRasterize:
    def test_direct_binning(self):
        r = rasterize(stream([(0, 0.0, 0), (1, 2.4, 0)]), 1.0)
        expected = np.zeros((2, 6))
        expected[0, 0] = expected[1, 2] = 1
        np.testing.assert_array_equal(r.data, expected)

    def test_empty_stream(self):
        r = rasterize(stream([], channels=3, duration=5.0), 1.0)
        assert r.data.shape == (3, 6)
        assert not r.data.any()

    def test_bin_collapse(self):
        r = rasterize(stream([(0, 1.2, 0), (0, 1.4, 0)]), 1.0)
        assert r.data.sum() == 1 and r.data[0, 1] == 1

    def test_round_half_up(self):
        r = rasterize(stream([(0, 1.5, 0), (1, 2.5, 0)]), 1.0)
        assert r.data[0, 2] == 1 and r.data[1, 3] == 1

    def test_split_polarity(self):
        r = rasterize(stream([(0, 1.0, 1), (1, 2.0, 0)]), 1.0, split_polarity=True)
        assert r.data.shape == (4, 6)
        assert r.data[2, 1] == 1 and r.data[1, 2] == 1

    def test_polarity_ignored_by_default(self):
        r = rasterize(stream([(0, 1.0, 1)]), 1.0)
        assert r.data[0, 1] == 1

    def test_out_of_range_bin(self):
        s = stream([(0, 5.8, 0)], duration=5.9)
        with pytest.raises(ValueError, match="out of range"):
            rasterize(s, 1.0)

    def test_window_length(self):
        assert rasterize(stream([], duration=300.0), 1.0).steps == 301

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.floats(0, 49.4)), max_size=60))
    def test_counts_bounded_by_events(self, evs):
        evs = sorted(evs, key=lambda e: e[1])
        s = stream([(c, t, 0) for c, t in evs], channels=4, duration=50.0)
        r = rasterize(s, 1.0)
        per_channel = np.bincount(s.channel, minlength=4)
        assert np.all(r.data.sum(axis=1) <= per_channel)
        assert set(np.unique(r.data)) <= {0.0, 1.0}


class TestStreamValidation:
    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="sorted"):
            stream([(0, 2.0, 0), (0, 1.0, 0)])

    def test_channel_out_of_range(self):
        with pytest.raises(ValueError):
            stream([(5, 1.0, 0)])

    def test_time_beyond_duration(self):
        with pytest.raises(ValueError):
            stream([(0, 5.0, 0)], duration=5.0)

    def test_events_view(self):
        s = stream([(0, 1.0, 1)])
        assert s.events() == [Event(0, 1.0, 1)]


class TestFiles:
    def test_binary_round_trip(self, tmp_path):
        s = stream([(0, 0.5, 1), (1, 3.25, 0)], label=3)
        p = write_events(s, tmp_path / "a.rade")
        back = load_events(p)
        assert back == s
        assert len(back) == 2

    def test_binary_header_layout(self, tmp_path):
        p = write_events(stream([(1, 2.0, 1)], label=4), tmp_path / "a.rade")
        blob = p.read_bytes()
        assert blob[:4] == b"RADE"
        assert len(blob) == 4 + 2 + 2 + 4 + 2 + 4 + 7

    def test_truncated_record(self, tmp_path):
        p = write_events(stream([(0, 0.5, 1), (1, 3.25, 0)]), tmp_path / "a.rade")
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(EventParseError) as err:
            load_events(p)
        assert err.value.offset == 18 + 7

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.rade"
        p.write_bytes(b"XXXX" + bytes(14))
        with pytest.raises(EventParseError):
            load_events(p)

    def test_unsorted_binary_is_sorted(self, tmp_path):
        s = stream([(0, 1.0, 0), (1, 3.0, 0)])
        p = write_events(s, tmp_path / "a.rade")
        blob = bytearray(p.read_bytes())
        blob[18:25], blob[25:32] = blob[25:32], blob[18:25]
        p.write_bytes(bytes(blob))
        assert load_events(p) == s

    def test_csv_line(self, tmp_path):
        p = tmp_path / "x_label2.csv"
        p.write_text("0,3.5,1\n")
        s = load_events(p)
        assert s.events() == [Event(0, 3.5, 1)]
        assert s.label == 2

    def test_csv_header_and_sorting(self, tmp_path):
        p = tmp_path / "y_label1.csv"
        p.write_text("channel,time_ms,polarity\n1,4.0,0\n0,2.0,1\n")
        s = load_events(p, channel_count=2, duration_ms=10.0)
        assert s.events() == [Event(0, 2.0, 1), Event(1, 4.0, 0)]
        assert s.duration_ms == 10.0

    def test_csv_malformed_line(self, tmp_path):
        p = tmp_path / "z.csv"
        p.write_text("0,1.0,0\n0,abc,0\n")
        with pytest.raises(EventParseError, match="line 2"):
            load_events(p)

    def test_csv_round_trip(self, tmp_path):
        s = stream([(0, 0.5, 1), (1, 3.25, 0)], label=1)
        p = write_events(s, tmp_path / "s_label1.csv", format="csv")
        assert load_events(p, channel_count=2, duration_ms=5.0) == s

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 7), st.floats(0, 99.0, width=32),
                              st.integers(0, 1)), max_size=40),
           st.integers(0, 10))
    def test_binary_round_trip_property(self, tmp_path_factory, evs, label):
        evs = sorted(evs, key=lambda e: e[1])
        s = EventStream.from_events(evs, 8, 100.0, label)
        p = write_events(s, tmp_path_factory.mktemp("rt") / "s.rade")
        assert load_events(p) == s


class TestSynth:
    def test_deterministic(self):
        a = synth_temporal_task(2, 8, 1, seed=7)
        b = synth_temporal_task(2, 8, 1, seed=7)
        assert a == b

    def test_distinct_seeds_distinct_jitter(self):
        a = synth_temporal_task(2, 8, 1, seed=7)
        b = synth_temporal_task(2, 8, 1, seed=8)
        assert a != b

    def test_templates_share_channel_counts(self):
        s = synth_temporal_task(2, 8, 1, seed=0, jitter_ms=0.0)
        c0 = np.bincount(s[0].channel, minlength=8)
        c1 = np.bincount(s[1].channel, minlength=8)
        np.testing.assert_array_equal(c0, c1)
        assert [x.label for x in s] == [0, 1]

    def test_classes_differ_in_timing(self):
        s = synth_temporal_task(2, 8, 1, seed=0, jitter_ms=0.0)
        assert not np.array_equal(s[0].time, s[1].time) or \
            not np.array_equal(s[0].channel, s[1].channel)

    def test_more_classes(self):
        s = synth_temporal_task(5, 12, 2, seed=0)
        assert sorted({x.label for x in s}) == list(range(5))

    def test_invalid(self):
        with pytest.raises(ValueError):
            synth_temporal_task(1, 8, 1, seed=0)

    def test_count_only_classifier_is_at_chance(self):
        # least-squares linear readout on per-channel spike counts
        def features(streams):
            x, y = rasterize_all(streams)
            f = x.sum(axis=-1)
            return np.hstack([f, np.ones((len(f), 1))]), y

        xtr, ytr = features(synth_temporal_task(2, 16, 100, seed=11))
        xte, yte = features(synth_temporal_task(2, 16, 50, seed=12))
        w, *_ = np.linalg.lstsq(xtr, 2.0 * ytr - 1.0, rcond=None)
        acc = np.mean((xte @ w > 0).astype(int) == yte)
        assert abs(acc - 0.5) <= 0.10

    def test_load_dataset(self, tmp_path):
        for i, s in enumerate(synth_temporal_task(2, 4, 2, seed=1)):
            write_events(s, tmp_path / f"s{i}_label{s.label}.rade")
        data = load_dataset(tmp_path)
        assert len(data) == 4
