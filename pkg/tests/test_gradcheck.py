import numpy as np
import pytest

from radsnn.gradcheck import (GradCheckReport, central_difference, check_gradients,
                              delay_sign_agreement, double_sum_delay_gradient, gradcheck_network,
                              relative_error)
from radsnn.delay import delay_gradient


class TestCentralDifference:
    def test_quadratic(self):
        w = np.array([3.0])
        g = central_difference(lambda v: float(v[0] ** 2), w, 1e-4)
        assert g[0] == pytest.approx(6.0, abs=1e-8)
        assert w[0] == 3.0

    def test_scalar(self):
        assert central_difference(lambda v: v ** 3, 2.0, 1e-5) == pytest.approx(12.0, rel=1e-8)

    @pytest.mark.parametrize("h", [0.0, -1e-4])
    def test_nonpositive_step(self, h):
        with pytest.raises(ValueError):
            central_difference(lambda v: float(v.sum()), np.ones(2), h)

    def test_relative_error_zero_safe(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1.0, 2.0) == pytest.approx(0.5)


class TestNetworkGradients:
    @pytest.mark.parametrize("sizes, steps", [((2, 2, 2), 16), ((4, 8, 3), 32)])
    def test_weights_and_delays(self, sizes, steps):
        net, x, label = gradcheck_network(sizes, steps, seed=0)
        reports = check_gradients(net, x, label, include_delays=True)
        assert [r.h for r in reports] == [1e-3, 1e-4, 1e-5]
        best = min(r.max_error for r in reports)
        assert best < 1e-4, [r.to_dict()["worst_parameter"] for r in reports]

    def test_several_seeds(self):
        for seed in range(3):
            net, x, label = gradcheck_network((3, 5, 2), 24, seed=seed)
            assert any(r.passed for r in check_gradients(net, x, label))

    def test_report_fields(self):
        rep = GradCheckReport(1e-4, 1e-4, {"a": np.array([1e-6, 5e-3]), "b": np.array([0.0])})
        assert rep.worst == ("a", 1) and not rep.passed
        d = rep.to_dict()
        assert d["worst_parameter"] == "a" and d["max_relative_error"] == 5e-3


def test_delay_estimator_sign_agreement():
    frac, total = delay_sign_agreement(200, (2, 2, 2))
    assert total >= 200
    assert frac >= 0.95


class TestDoubleSum:
    def test_zero_raster(self, rng):
        assert not double_sum_delay_gradient(np.zeros((2, 6)), rng.normal(size=(2, 6, 6))).any()

    def test_single_spike(self):
        s = np.zeros((1, 5))
        s[0, 2] = 1
        G = np.tril(np.ones((1, 5, 5)))
        # rise at m=2 and fall at m=3; each counted once per n >= m
        assert double_sum_delay_gradient(s, G)[0] == pytest.approx(3 - 2)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            double_sum_delay_gradient(np.zeros((2, 4)), np.zeros((2, 4, 5)))

    def test_vectorised_equivalence(self, rng):
        for _ in range(10):
            n, steps = rng.integers(1, 5), rng.integers(2, 20)
            s = (rng.random((n, steps)) < 0.3).astype(float)
            G = np.tril(rng.normal(size=(n, steps, steps)))
            ts = float(rng.choice([0.5, 1.0]))
            np.testing.assert_allclose(delay_gradient(s, G.sum(axis=1), ts),
                                       double_sum_delay_gradient(s, G, ts), rtol=1e-12, atol=1e-12)
