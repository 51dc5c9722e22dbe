from plone.testing.zca import UNIT_TESTING

import math
import numpy as np
import unittest


def _unit(dim=1):
    from ruinbounds.gaussian import build_covariance

    return build_covariance(np.eye(dim))


class TestDriftPenalty(unittest.TestCase):
    layer = UNIT_TESTING

    def test_infimum_grid(self):
        from ruinbounds.bounds import infimum_grid

        points = infimum_grid(2.0, 8)
        self.assertEqual(0.0, points[0])
        self.assertEqual(2.0, points[-1])
        steps = np.diff(points)
        self.assertTrue(np.all(steps[1:] < steps[:-1]))

    def test_zero_trend(self):
        from ruinbounds.bounds import CLOSED_FORM
        from ruinbounds.bounds import frak_C
        from ruinbounds.trends import TrendFunction

        penalty = frak_C(1.0, TrendFunction.zero(2), _unit(2))
        self.assertEqual(1.0, penalty.value)
        self.assertEqual(CLOSED_FORM, penalty.method)

    def test_linear_closed_form_matches_grid(self):
        from ruinbounds.bounds import CLOSED_FORM
        from ruinbounds.bounds import frak_C
        from ruinbounds.gaussian import equicorrelated
        from ruinbounds.trends import TrendFunction

        cases = [
            (1.0, [0.5], _unit()),
            (2.0, [0.5], _unit()),
            (1.0, [1.0, -0.5], _unit(2)),
            (0.5, [1.0, 1.0], equicorrelated(2, 0.5)),
            (1.0, [0.3, 0.0, 0.2], equicorrelated(3, 0.2)),
            (3.0, [0.1, 0.2], equicorrelated(2, -0.5)),
        ]
        for T, c, model in cases:
            trend = TrendFunction.linear(c)
            closed = frak_C(T, trend, model)
            grid = frak_C(T, trend, model, method="grid")
            self.assertEqual(CLOSED_FORM, closed.method)
            self.assertLess(abs(grid.value / closed.value - 1.0), 1e-6, msg=(T, c))
            expected = math.exp(-T * T * float(model.quadratic_form(c)))
            self.assertAlmostEqual(expected, closed.value, places=12)

    def test_power_trend_is_searched(self):
        from ruinbounds.bounds import frak_C
        from ruinbounds.bounds import GRID_REFINED
        from ruinbounds.trends import TrendFunction

        # c(t) = t^2: q(t) = (1 - t^2)^2 / (1 - t) = (1 - t)(1 + t)^2 peaks at 1/3
        penalty = frak_C(1.0, TrendFunction.power([1.0], [2.0]), _unit())
        self.assertEqual(GRID_REFINED, penalty.method)
        self.assertAlmostEqual(1.0 / 3.0, penalty.argmin_t, places=4)
        self.assertAlmostEqual(math.exp(-32.0 / 27.0), penalty.value, places=6)

    def test_endpoint_approach(self):
        from ruinbounds.bounds import endpoint_approach
        from ruinbounds.bounds import infimum_grid

        grid = infimum_grid(1.0, 8)
        points = endpoint_approach(grid)
        self.assertEqual(grid[:-1].tolist(), points[:8].tolist())
        self.assertEqual(1.0, points[-1])
        self.assertTrue(np.all(np.diff(points) > 0))
        self.assertLessEqual(1.0 - points[-2], 2e-10)

    def test_kink_inside_last_interval(self):
        from ruinbounds.bounds import frak_C
        from ruinbounds.trends import TrendFunction

        # q(t) = 0.01^2 / (1 - t) up to the kink at 1 - 1e-4, where it is 1;
        # the last grid point alone gives q = 0.0512
        trend = TrendFunction.tabulated([0.0, 1.0 - 1e-4, 1.0], [[0.0], [0.0], [0.01]])
        penalty = frak_C(1.0, trend, _unit(), resolution=8)
        self.assertAlmostEqual(math.exp(-1.0), penalty.value, delta=0.01)
        self.assertAlmostEqual(1.0 - 1e-4, penalty.argmin_t, delta=1e-5)
        self.assertLess(penalty.components["endpoint_q"], 1e-5)

    def test_infimum_approached_at_horizon(self):
        from ruinbounds.bounds import endpoint_approach
        from ruinbounds.bounds import frak_C
        from ruinbounds.bounds import infimum_grid
        from ruinbounds.trends import TrendFunction

        # q increases up to a kink closer to T than any evaluated point
        trend = TrendFunction.tabulated(
            [0.0, 1.0 - 5e-11, 1.0], [[0.0], [0.0], [5e-6]]
        )
        penalty = frak_C(1.0, trend, _unit(), resolution=8)
        closest = endpoint_approach(infimum_grid(1.0, 8))[-2]
        self.assertEqual(closest, penalty.argmin_t)
        self.assertAlmostEqual(
            penalty.components["endpoint_q"], -penalty.log_value, places=12
        )
        self.assertGreater(penalty.components["endpoint_q"], 0.1)

    def test_holder_violation(self):
        from ruinbounds.bounds import frak_C
        from ruinbounds.interfaces import HolderViolation
        from ruinbounds.trends import TrendFunction

        self.assertRaises(
            HolderViolation, frak_C, 1.0, TrendFunction.linear([5.0]), _unit(), cap=1.0
        )

    def test_underflow_is_vacuous(self):
        from ruinbounds.bounds import frak_C
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        trend = TrendFunction.linear([100.0])
        penalty = frak_C(1.0, trend, _unit())
        self.assertTrue(penalty.vacuous)
        self.assertEqual(-10000.0, penalty.log_value)
        K = K_theorem13(1.0, make_k_of_d(1, 1, [1.0]), trend, _unit())
        self.assertTrue(K.vacuous)
        self.assertFalse(K.finite)

    def test_dimension_mismatch(self):
        from ruinbounds.bounds import frak_C
        from ruinbounds.interfaces import DimensionMismatch
        from ruinbounds.trends import TrendFunction

        self.assertRaises(
            DimensionMismatch, frak_C, 1.0, TrendFunction.zero(1), _unit(2)
        )


class TestBrownianConstants(unittest.TestCase):
    layer = UNIT_TESTING

    def test_one_dimension(self):
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        K = K_theorem13(1.0, make_k_of_d(1, 1, [1.0]), TrendFunction.zero(1), _unit())
        self.assertAlmostEqual(2.0 * math.sqrt(2.0), K.value)
        self.assertAlmostEqual(math.log(K.value), K.log_value)
        self.assertEqual(0.5, K.components["epsilon"])

    def test_independent_pair(self):
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        S = make_k_of_d(2, 2, [1.0, 1.0])
        K = K_theorem13(1.0, S, TrendFunction.zero(2), _unit(2))
        self.assertAlmostEqual(8.0, K.value, places=3)

    def test_orthant_constant(self):
        from ruinbounds.bounds import K_orthant
        from ruinbounds.gaussian import equicorrelated

        self.assertEqual(2.0, K_orthant(1.0, _unit()).value)
        correlated = K_orthant(5.0, equicorrelated(2, 0.5))
        self.assertAlmostEqual(3.0, correlated.value, places=3)

    def test_never_below_dimension_factor(self):
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.gaussian import equicorrelated
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        for d, k, rho, c in [(1, 1, 0.0, 0.5), (2, 1, -0.5, 0.0), (3, 2, 0.5, 1.0)]:
            model = equicorrelated(d, rho) if d > 1 else _unit()
            trend = TrendFunction.linear([c] * d)
            K = K_theorem13(2.0, make_k_of_d(d, k, [1.0] * d), trend, model)
            self.assertGreaterEqual(K.value, 2.0 ** (d / 2.0))


class TestConvolutionConstants(unittest.TestCase):
    layer = UNIT_TESTING

    def test_single_axis(self):
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.bounds import K_theorem15
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        S = make_k_of_d(1, 1, [1.0])
        trend = TrendFunction.linear([0.5])
        single = K_theorem15([2.0], S, [trend], [_unit()])
        self.assertEqual(K_theorem13(2.0, S, trend, _unit()).value, single.value)

    def test_product_over_axes(self):
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.bounds import K_theorem15
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        S = make_k_of_d(1, 1, [1.0])
        trends = [TrendFunction.linear([0.5]), TrendFunction.zero(1)]
        K = K_theorem15([1.0, 2.0], S, trends, [_unit(), _unit()])
        first = K_theorem13(1.0, S, trends[0], _unit())
        second = K_theorem13(2.0, S, trends[1], _unit())
        self.assertAlmostEqual(first.value * second.value, K.value)
        self.assertEqual(first.value, K.components["K_1"])
        self.assertIsNone(K.argmin_t)

    def test_mismatched_axes(self):
        from ruinbounds.bounds import K_theorem15
        from ruinbounds.interfaces import DimensionMismatch
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TrendFunction

        self.assertRaises(
            DimensionMismatch,
            K_theorem15,
            [1.0, 2.0],
            make_k_of_d(1, 1, [1.0]),
            [TrendFunction.zero(1)],
            [_unit()],
        )


class TestTimeTransformedConstants(unittest.TestCase):
    layer = UNIT_TESTING

    def test_identity_clock_matches_brownian(self):
        from ruinbounds.bounds import K_theorem13
        from ruinbounds.bounds import K_theorem31
        from ruinbounds.gaussian import equicorrelated
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TimeTransform
        from ruinbounds.trends import TrendFunction

        S = make_k_of_d(2, 1, [1.0, 1.0])
        model = equicorrelated(2, 0.5)
        trend = TrendFunction.linear([0.5, 0.25])
        K = K_theorem31(1.0, S, trend, TimeTransform.identity(2), model)
        brownian = K_theorem13(1.0, S, trend, model)
        self.assertLess(abs(K.value / brownian.value - 1.0), 1e-6)
        self.assertEqual(1.0, K.components["delta_min"])
        self.assertEqual(1.0, K.components["delta_max"])

    def test_delta_extrema_of_power_clocks(self):
        from ruinbounds.bounds import delta_extrema
        from ruinbounds.trends import TimeTransform

        low, high, limit = delta_extrema(1.0, TimeTransform.from_hurst([0.6, 0.9]))
        self.assertAlmostEqual(1.0, low)
        self.assertLess(abs(high / 1.5 - 1.0), 0.01)
        self.assertLess(abs(limit[1] / 1.5 - 1.0), 0.01)

    def test_fractional_majorant(self):
        from ruinbounds.bounds import K_theorem31
        from ruinbounds.ruinsets import make_k_of_d
        from ruinbounds.trends import TimeTransform
        from ruinbounds.trends import TrendFunction

        K = K_theorem31(
            1.0,
            make_k_of_d(2, 2, [1.0, 1.0]),
            TrendFunction.linear([0.5, 0.5]),
            TimeTransform.from_hurst([0.6, 0.9]),
            _unit(2),
        )
        self.assertTrue(K.finite)
        self.assertGreaterEqual(K.value, 2.0)
        self.assertIn("delta_limit_2", K.components)
