import math

import numpy as np
import pytest
from scipy.special import gamma, roots_laguerre

from casphere.quadrature import QuadratureError, gauss_laguerre_log, neville_to_zero


class TestGaussLaguerreLog:
    def test_matches_reference_rule_small_order(self):
        for order in (1, 2, 5, 20):
            nodes, logw = gauss_laguerre_log(order)
            ref_nodes, ref_weights = roots_laguerre(order)
            assert nodes == pytest.approx(ref_nodes, rel=1e-12)
            assert np.exp(logw) == pytest.approx(ref_weights, rel=1e-11)

    def test_polynomial_exactness(self):
        # order n integrates t^k exp(-t) exactly for k <= 2n - 1
        nodes, logw = gauss_laguerre_log(8)
        w = np.exp(logw)
        for k in (0, 1, 5, 15):
            assert w @ nodes**k == pytest.approx(gamma(k + 1), rel=1e-12)

    def test_large_order_weights_finite_in_log(self):
        nodes, logw = gauss_laguerre_log(500)
        assert np.all(np.isfinite(logw))
        assert np.all(np.diff(nodes) > 0)
        # classical weights underflow at the far nodes, the logs must not
        assert logw[-1] < -500.0
        value = float(np.exp(logw) @ nodes**2)
        assert value == pytest.approx(2.0, rel=1e-10)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            gauss_laguerre_log(0)


class TestNeville:
    def test_exact_for_polynomial(self):
        xs = [1e-3, 5e-4, 2.5e-4]
        ys = [2.0 - 3.0 * x + 7.0 * x * x for x in xs]
        assert neville_to_zero(xs, ys) == pytest.approx(2.0, rel=1e-12)

    def test_linear(self):
        xs = [0.2, 0.1]
        ys = [1.2, 1.1]
        assert neville_to_zero(xs, ys) == pytest.approx(1.0, rel=1e-12)


class TestQuadratureError:
    def test_carries_estimates(self):
        err = QuadratureError("no convergence", last=1.5, previous=1.4)
        assert err.last == 1.5
        assert err.previous == 1.4
        assert "no convergence" in str(err)
