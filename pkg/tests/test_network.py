import math

import numpy as np
import pytest

from radsnn.delay import DelayState
from radsnn.events import rasterize_all, synth_temporal_task
from radsnn.loss import Optimizer, OptimizerConfig, TargetSpec
from radsnn.network import (Dataset, Network, NetworkSpec, TrainConfig, TrainingDiverged,
                            cumulative_trace, decision_step, evaluate, train, train_epoch)

from conftest import random_raster


def small_data(n_per_class=8, seed=0, classes=2, channels=8):
    streams = synth_temporal_task(classes, channels, n_per_class, seed)
    x, y = rasterize_all(streams)
    return Dataset(x, y)


class TestSpec:
    def test_reference_architecture_counts(self):
        spec = NetworkSpec((64, 256, 256, 11), theta_d=128)
        assert spec.weight_count() == 84_736
        assert spec.delay_count() == 512
        assert spec.param_count() == 85_248
        assert Network.build(spec).param_count() == 85_248

    def test_no_delay_counts(self):
        for spec in (NetworkSpec((64, 256, 256, 11), delays=False),
                     NetworkSpec((64, 256, 256, 11), theta_d=0)):
            assert spec.param_count() == 84_736
            assert Network.build(spec).param_count() == 84_736

    def test_per_layer_theta(self):
        spec = NetworkSpec((4, 5, 6, 2), theta_d=[0, "inf"])
        assert spec.hidden_theta_d == [0.0, math.inf]
        assert spec.delay_count() == 6

    def test_invalid(self):
        with pytest.raises(ValueError):
            NetworkSpec((4,))
        with pytest.raises(ValueError):
            NetworkSpec((4, 3), tau_s=0)
        with pytest.raises(ValueError):
            NetworkSpec((4, 5, 2), theta_d=-1)

    def test_dict_round_trip(self):
        spec = NetworkSpec((4, 5, 6, 2), theta_d=[3.0, "inf"], seed=7)
        again = NetworkSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()


class TestForward:
    def test_zero_cap_matches_no_delay_bitwise(self, rng):
        a = Network.build(NetworkSpec((6, 10, 3), theta_d=0, seed=3))
        b = Network.build(NetworkSpec((6, 10, 3), delays=False, seed=3))
        x = random_raster(rng, 6, 50, 0.2)
        assert np.array_equal(a.output_spikes(x), b.output_spikes(x))

    def test_seed_determinism(self, rng):
        x = random_raster(rng, 6, 40, 0.2)
        a = Network.build(NetworkSpec((6, 10, 3), seed=5))
        b = Network.build(NetworkSpec((6, 10, 3), seed=5))
        c = Network.build(NetworkSpec((6, 10, 3), seed=6))
        assert all(np.array_equal(p, q) for p, q in zip(a.parameters().values(),
                                                         b.parameters().values()))
        assert not np.array_equal(a.layers[0].weights, c.layers[0].weights)
        assert np.array_equal(a.output_spikes(x), b.output_spikes(x))

    def test_batch_matches_single(self, rng):
        net = Network.build(NetworkSpec((6, 10, 3), seed=1, init_rate=0.02))
        net.layers[0].delay.raw_delays[:] = rng.uniform(0, 10, 10)
        x = np.stack([random_raster(rng, 6, 40, 0.3) for _ in range(3)])
        batched = net.output_spikes(x)
        for i in range(3):
            assert np.array_equal(batched[i], net.output_spikes(x[i]))

    def test_output_binary(self, rng):
        net = Network.build(NetworkSpec((6, 10, 3), init_rate=0.02))
        out = net.output_spikes(random_raster(rng, 6, 40, 0.3))
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_delay_shifts_output_in_time(self):
        net = Network.build(NetworkSpec((1, 1, 1), seed=0))
        net.layers[0].weights[:] = 30.0
        net.layers[1].weights[:] = 30.0
        x = np.zeros((1, 40))
        x[0, 2] = 1
        base = np.flatnonzero(net.output_spikes(x)[0])
        net.layers[0].delay.raw_delays[:] = 5.0
        moved = np.flatnonzero(net.output_spikes(x)[0])
        assert len(base) and moved[0] == base[0] + 5


class TestTraining:
    def test_zero_learning_rate_is_noop(self):
        data = small_data()
        net = Network.build(NetworkSpec((8, 12, 2), seed=0, init_rate=0.1))
        before = {k: v.copy() for k, v in net.parameters().items()}
        opt = Optimizer(OptimizerConfig("adam", 0.0, 0.0))
        train_epoch(net, data, opt, TargetSpec.scaled(data.steps))
        for k, v in net.parameters().items():
            np.testing.assert_array_equal(v, before[k])

    def test_single_sample_overfit(self):
        data = small_data(1)
        one = Dataset(data.x[:1], data.y[:1])
        net = Network.build(NetworkSpec((8, 16, 2), seed=0, init_rate=0.1))
        target = TargetSpec.scaled(one.steps)
        opt = Optimizer(OptimizerConfig("adam", 0.05, 1.0))
        first, _ = train_epoch(net, one, opt, target)
        losses = [first] + [train_epoch(net, one, opt, target, epoch=e)[0] for e in range(1, 150)]
        assert first > 10
        assert min(losses[-20:]) <= 0.02 * first
        assert evaluate(net, one).accuracy == 1.0

    def test_identical_runs_identical_rows(self):
        data = small_data()
        cfg = TrainConfig(epochs=3, optimizer=OptimizerConfig("adam", 0.05, 1.0))
        rows = []
        for _ in range(2):
            net = Network.build(NetworkSpec((8, 12, 2), seed=2, init_rate=0.1))
            report, _ = train(net, data, data, cfg)
            rows.append(report.rows)
        assert rows[0] == rows[1]
        assert len(rows[0]) == 3 and rows[0][0]["epoch"] == 1

    def test_delays_stay_in_range(self):
        data = small_data()
        net = Network.build(NetworkSpec((8, 12, 2), theta_d=4.0, seed=0, init_rate=0.1))
        train(net, data, None, TrainConfig(epochs=4, optimizer=OptimizerConfig("adam", 0.05, 5.0)))
        d = net.layers[0].delay.clamped_delays
        assert np.all((d >= 0) & (d <= 4.0))

    def test_untrained_near_chance(self):
        data = small_data(50)
        accs = [evaluate(Network.build(NetworkSpec((8, 12, 2), seed=s, init_rate=0.1)), data).accuracy
                for s in range(5)]
        assert abs(np.mean(accs) - 0.5) <= 0.1

    def test_diverged(self):
        data = small_data(2)
        net = Network.build(NetworkSpec((8, 12, 2), seed=0, init_rate=0.1))
        net.layers[0].weights[0, 0] = np.nan
        with pytest.raises(TrainingDiverged, match="epoch 0"):
            train_epoch(net, data, Optimizer(), TargetSpec.scaled(data.steps))


class TestEvaluate:
    def test_pure_and_confusion(self):
        data = small_data(10, classes=3, channels=9)
        net = Network.build(NetworkSpec((9, 12, 3), seed=0, init_rate=0.1))
        before = {k: v.copy() for k, v in net.parameters().items()}
        a = evaluate(net, data, chunk=7)
        b = evaluate(net, data)
        for k, v in net.parameters().items():
            np.testing.assert_array_equal(v, before[k])
        assert a.accuracy == b.accuracy and a.mean_loss == pytest.approx(b.mean_loss)
        np.testing.assert_array_equal(a.confusion.sum(axis=1), np.bincount(data.y, minlength=3))
        assert a.confusion.sum() == len(data)

    def test_empty(self):
        net = Network.build(NetworkSpec((8, 4, 2)))
        with pytest.raises(ValueError):
            evaluate(net, Dataset(np.zeros((0, 8, 10)), np.zeros(0, dtype=int)))


class TestCumulative:
    def test_monotone_and_totals(self, rng):
        net = Network.build(NetworkSpec((6, 10, 3), init_rate=0.02))
        x = random_raster(rng, 6, 60, 0.3)
        tr = cumulative_trace(net, x)
        assert np.all(np.diff(tr.counts, axis=1) >= 0)
        np.testing.assert_array_equal(tr.totals, net.output_spikes(x).sum(axis=1))
        assert 0 <= tr.decision_time_ms <= 60

    def test_silent_output(self):
        net = Network.build(NetworkSpec((6, 10, 3)))
        tr = cumulative_trace(net, np.zeros((6, 30)))
        assert tr.decision_step == 0 and not tr.totals.any()

    def test_decision_step_example(self):
        counts = np.zeros((2, 1000))
        counts[1, 100:] = 1           # class 1 leads from step 100
        counts[0, 600:] = 2           # class 0 overtakes at 600
        counts[1, 800:] = 3           # class 1 takes over for good at 800
        assert decision_step(counts) == 800
