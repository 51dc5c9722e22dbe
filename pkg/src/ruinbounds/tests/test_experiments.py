from ruinbounds.testing import RUINBOUNDS_FIXTURE

import math
import unittest


def _config(**values):
    from ruinbounds.config import ExperimentConfig
    from ruinbounds.config import validated

    settings = {
        "name": "small",
        "dimension": 1,
        "k": 1,
        "thresholds": [1.0],
        "trend": "linear",
        "trend_coefficients": [0.5],
        "u_values": [1.0],
        "resolutions": [16, 32],
        "n_paths": 2000,
        "seed": 3,
    }
    settings.update(values)
    return validated(ExperimentConfig(**settings))


class TestRunners(unittest.TestCase):
    layer = RUINBOUNDS_FIXTURE

    def test_registered_runners(self):
        from ruinbounds.experiments import BROWNIAN_RUNNER
        from ruinbounds.experiments import getRunner
        from ruinbounds.experiments import GORDON_RUNNER
        from ruinbounds.interfaces import IExperimentRunner
        from ruinbounds.interfaces import PROCESS_FAMILIES

        self.assertIs(BROWNIAN_RUNNER, getRunner("bm"))
        self.assertIs(GORDON_RUNNER, getRunner("gordon"))
        for process in PROCESS_FAMILIES:
            self.assertTrue(IExperimentRunner.providedBy(getRunner(process)))
        self.assertRaises(ValueError, getRunner, "levy")

    def test_brownian_cell(self):
        from ruinbounds.experiments import run_cell
        from ruinbounds.interfaces import HOLDS

        row = run_cell(_config(), 1.0)
        self.assertEqual(HOLDS, row.status)
        self.assertEqual("small", row.name)
        self.assertEqual("bm", row.process)
        self.assertEqual("theorem13", row.K_used)
        self.assertEqual(64, len(row.fingerprint))
        self.assertEqual([16, 32], [level[0] for level in row.refinement_trace])
        # P(B(1) - 1/2 > 1)
        self.assertAlmostEqual(0.0668072, row.lower, places=6)
        self.assertAlmostEqual(2.0 * math.sqrt(2.0) * math.exp(0.25), row.K)
        self.assertLessEqual(row.lower, row.middle)
        self.assertLessEqual(row.middle, row.upper)

    def test_cells_are_reproducible(self):
        from ruinbounds.experiments import run_cell

        config = _config()
        first = run_cell(config, 1.0, cell_index=2)
        second = run_cell(config, 1.0, cell_index=2, jobs=2)
        other = run_cell(config, 1.0, cell_index=3)
        self.assertEqual(first.middle, second.middle)
        self.assertEqual(first.refinement_trace, second.refinement_trace)
        self.assertEqual(2, first.cell)
        self.assertNotEqual(first.refinement_trace, other.refinement_trace)

    def test_run_experiment_keeps_order(self):
        from ruinbounds.experiments import run_experiment

        config = _config(u_values=[1.0, 2.0, 3.0], n_paths=200)
        rows = run_experiment(config, jobs=2)
        self.assertEqual([1.0, 2.0, 3.0], [row.u for row in rows])
        self.assertEqual([0, 1, 2], [row.cell for row in rows])

    def test_failures_become_error_rows(self):
        from ruinbounds.experiments import run_cell
        from ruinbounds.interfaces import ERROR

        config = _config(process="convolution", axes=2, budget=100)
        row = run_cell(config, 1.0)
        self.assertEqual(ERROR, row.status)
        self.assertTrue(row.error.startswith("BudgetExceeded: "))
        self.assertEqual("small", row.name)
        self.assertIsNotNone(row.wall_time)

    def test_convolution_cell(self):
        from ruinbounds.experiments import run_cell
        from ruinbounds.interfaces import HOLDS
        from ruinbounds.interfaces import HOLDS_WITHIN_CI

        config = _config(process="convolution", axes=2, resolutions=[8, 16])
        row = run_cell(config, 1.0)
        self.assertIn(row.status, (HOLDS, HOLDS_WITHIN_CI))
        self.assertEqual("theorem15", row.K_used)

    def test_transform_sandwich(self):
        from ruinbounds.experiments import verify_sandwich
        from ruinbounds.interfaces import HOLDS
        from ruinbounds.interfaces import HOLDS_WITHIN_CI

        config = _config(
            process="transform",
            dimension=2,
            thresholds=[1.0, 1.0],
            correlation=0.5,
            trend="zero",
            hurst=[0.6, 0.9],
            n_paths=1000,
        )
        verdict = verify_sandwich(config)
        self.assertEqual("theorem31", verdict.constant_used)
        self.assertIn(verdict.status, (HOLDS, HOLDS_WITHIN_CI))

    def test_chain_families_have_no_sandwich(self):
        from ruinbounds.experiments import config_ensemble
        from ruinbounds.experiments import verify_sandwich

        fbm = _config(process="fbm", hurst=[0.75])
        self.assertRaises(ValueError, verify_sandwich, fbm)
        convolution = _config(process="convolution", axes=2)
        self.assertRaises(ValueError, config_ensemble, convolution)
        self.assertEqual(32, config_ensemble(fbm).grid.resolution)


class TestChains(unittest.TestCase):
    layer = RUINBOUNDS_FIXTURE

    def test_fbm_chain(self):
        from ruinbounds.experiments import DIRECT_MAJORANT
        from ruinbounds.experiments import fbm_chain_experiment
        from ruinbounds.interfaces import HOLDS
        from ruinbounds.interfaces import HOLDS_WITHIN_CI

        report = fbm_chain_experiment(0.75, 1.0, 1.0, 1.0, n_paths=2000, resolution=64)
        self.assertIn(report.status, (HOLDS, HOLDS_WITHIN_CI))
        self.assertIn(DIRECT_MAJORANT, report.claimed)
        self.assertEqual((), report.notes)
        # P(B(1) > 2)
        self.assertAlmostEqual(0.0227501, report.anchor.value, places=6)
        self.assertLessEqual(report.direct.terminal_hits, report.direct.hits)

    def test_rough_paths_are_not_claimed(self):
        from ruinbounds.experiments import DIRECT_MAJORANT
        from ruinbounds.experiments import fbm_chain_experiment
        from ruinbounds.experiments import OUTSIDE_HYPOTHESES

        report = fbm_chain_experiment(0.4, 1.0, 1.0, 1.0, n_paths=500, resolution=32)
        self.assertNotIn(DIRECT_MAJORANT, report.claimed)
        self.assertIn(DIRECT_MAJORANT, report.orderings)
        self.assertIn(OUTSIDE_HYPOTHESES, report.notes)

    def test_single_axis_convolution_matches_chain(self):
        from ruinbounds.experiments import fbm_chain_experiment
        from ruinbounds.experiments import fbm_convolution_experiment

        options = {"n_paths": 500, "resolution": 32, "seed": 2}
        chain = fbm_chain_experiment(0.75, 1.0, 1.0, 1.5, **options)
        field = fbm_convolution_experiment([0.75], 1.0, 1.0, 1.5, **options)
        self.assertEqual(chain.direct.hits, field.direct.hits)
        self.assertEqual(chain.majorant.hits, field.majorant.hits)
        self.assertAlmostEqual(chain.anchor.value, field.anchor.value)
        self.assertAlmostEqual(chain.constant.value, field.constant.value)

    def test_two_axis_chain(self):
        from ruinbounds.experiments import fbm_convolution_experiment
        from scipy.special import ndtr

        report = fbm_convolution_experiment(
            [0.75, 0.6], [1.0, 0.5], 1.0, 1.0, n_paths=200, resolution=16
        )
        spread = math.sqrt(2.0)
        self.assertAlmostEqual(float(ndtr(-2.5 / spread)), report.anchor.value)
        self.assertIn("K_2", report.constant.components)

    def test_gordon_chain(self):
        from ruinbounds.experiments import gordon_experiment

        report = gordon_experiment(
            [0.6, 0.9], 0.5, 1.0, 1.0, n_paths=1000, resolution=256
        )
        self.assertTrue(report.checks["delta_limit_ok"])
        self.assertAlmostEqual(1.5, report.checks["delta_expected_2"])
        self.assertAlmostEqual(0.0668072**2, report.anchor.value, places=6)
        self.assertEqual(3, len(report.claimed))


class TestBoundConstant(unittest.TestCase):
    layer = RUINBOUNDS_FIXTURE

    def test_orthant_constant_is_reported_beside(self):
        from ruinbounds.config import load_config
        from ruinbounds.config import shipped_configs
        from ruinbounds.experiments import bound_constant

        K, used = bound_constant(load_config(shipped_configs()[0]))
        self.assertEqual("theorem13", used)
        self.assertAlmostEqual(2.0 * math.sqrt(2.0), K.value)
        self.assertEqual(2.0, K.components["K_orthant"])

    def test_independent_pair_keeps_general_constant(self):
        from ruinbounds.config import load_config
        from ruinbounds.config import shipped_configs
        from ruinbounds.experiments import bound_constant

        path = [p for p in shipped_configs() if p.stem.startswith("matrix-04")][0]
        K, used = bound_constant(load_config(path))
        self.assertEqual("theorem13", used)
        self.assertAlmostEqual(8.0, K.value, places=3)
        self.assertAlmostEqual(4.0, K.components["K_orthant"], places=3)

    def test_linear_trend_uses_brownian_constant(self):
        from ruinbounds.experiments import bound_constant

        K, used = bound_constant(_config())
        self.assertEqual("theorem13", used)
        self.assertNotIn("K_orthant", K.components)

    def test_fbm_constants(self):
        from ruinbounds.experiments import bound_constant

        _, used = bound_constant(_config(process="fbm", hurst=[0.75]))
        self.assertEqual("theorem13", used)
        _, used = bound_constant(_config(process="fbm", axes=2, hurst=[0.75, 0.6]))
        self.assertEqual("theorem15", used)
