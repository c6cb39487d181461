import os
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

from analysis import (
    v_upper, v_lower, analytic_variance, empirical_variance, containment_grid,
    qvalue_map, filtered_latent_at, dump_rollout, rollout_mse, dump_latents, latent_centroids,
    write_pgm, read_pgm, to_gray,
)
from dataset import collect
from envs import ContactEnv, EnvConfig
from models import NoiseModel, OBS_DIM, PlanConfig, TaskKind, ValidationError
from utils.csv_io import read_csv
from utils.error_handler import ShapeError
from worldmodel import ModelConfig, ModelSnapshot, WorldModel


def small_snapshot(zero=False, **overrides):
    values = dict(obs_dim=OBS_DIM, h_dim=8, z_dim=4, encoder_widths=(16,), decoder_widths=(16,),
                  head_widths=(8,), posterior_width=8, seed=5)
    values.update(overrides)
    config = ModelConfig(**values)
    model = WorldModel(config)
    return ModelSnapshot(config, model.zero_params() if zero else model.init_params())


class TestVarianceBounds(unittest.TestCase):

    def test_upper_bound_values(self):
        self.assertAlmostEqual(v_upper(4, 0.0, 1.0), 0.25, places=12)
        self.assertAlmostEqual(v_upper(4, 1.0, 1.0), 1.0, places=12)
        for rho in (0.0, 0.3, 0.9):
            self.assertAlmostEqual(v_upper(1, rho, 2.0), 2.0, places=12)

    def test_lower_bound_values(self):
        self.assertAlmostEqual(v_lower(4, 0.0, 1.0, 1.0), 0.25, places=12)
        self.assertEqual(v_lower(4, 0.5, 1.0, 1.0), 0.0)
        self.assertEqual(v_lower(4, 0.2, 0.0, 1.0), 0.0)

    def test_upper_bound_monotone(self):
        rhos = np.linspace(0, 0.99, 12)
        for n in (1, 2, 4, 6, 10):
            values = [v_upper(n, rho, 1.0) for rho in rhos]
            self.assertTrue(all(b >= a for a, b in zip(values, values[1:])))
            by_variance = [v_upper(n, 0.3, v) for v in (0.1, 0.5, 1.0, 3.0)]
            self.assertTrue(all(b >= a for a, b in zip(by_variance, by_variance[1:])))

    def test_analytic_variance_between_bounds(self):
        for n in (1, 3, 6):
            for rho in (0.0, 0.4, 0.8):
                noise = NoiseModel(n, rho, v_max=2.0, v_min=0.5)
                value = analytic_variance(noise)
                self.assertLessEqual(value, v_upper(n, rho, 2.0) + 1e-12)
                self.assertGreaterEqual(value, v_lower(n, rho, 0.5, 2.0) - 1e-12)

    def test_equicorrelated_attains_upper_bound(self):
        noise = NoiseModel(4, 0.5, v_max=1.0)
        self.assertAlmostEqual(analytic_variance(noise), 0.625, places=12)
        self.assertAlmostEqual(analytic_variance(noise), v_upper(4, 0.5, 1.0), places=12)


class TestEmpiricalVariance(unittest.TestCase):

    def test_independent_errors(self):
        report = empirical_variance(NoiseModel(4, 0.0, 1.0, trials=100000), seed=1)
        self.assertLessEqual(abs(report.empirical_var - 0.25), 3 * report.standard_error)
        self.assertTrue(report.passed)

    def test_half_correlated_errors(self):
        report = empirical_variance(NoiseModel(4, 0.5, 1.0, trials=100000), seed=2)
        self.assertLessEqual(abs(report.empirical_var - 0.625), 3 * report.standard_error)
        self.assertLessEqual(report.empirical_var, report.v_ub + 3 * report.standard_error)

    def test_strong_correlation_gives_little_reduction(self):
        report = empirical_variance(NoiseModel(4, 0.99, 1.0, trials=100000), seed=3)
        self.assertLessEqual(abs(report.empirical_var - report.analytic_var), 3 * report.standard_error)
        self.assertAlmostEqual(report.empirical_var, 1.0, delta=0.03)

    def test_containment_grid(self):
        reports = containment_grid(trials=100000, seed=0)
        self.assertEqual(len(reports), 48)
        failed = [r.to_dict() for r in reports if not r.passed]
        self.assertEqual(failed, [])

    def test_independent_limit(self):
        for n in (1, 2, 4, 6):
            report = empirical_variance(NoiseModel(n, 0.0, 2.0, trials=50000), seed=4)
            self.assertLessEqual(abs(report.empirical_var - 2.0 / n), 3 * report.standard_error)

    def test_unequal_variances(self):
        report = empirical_variance(NoiseModel(4, 0.25, v_max=2.0, v_min=0.5, trials=50000), seed=5)
        self.assertTrue(report.passed)
        self.assertLess(report.v_lb, report.analytic_var)
        self.assertLess(report.analytic_var, report.v_ub)

    def test_invariant_to_blocks_and_workers(self):
        noise = NoiseModel(3, 0.3, 1.0, trials=20000)
        base = empirical_variance(noise, seed=9)
        split = empirical_variance(noise, seed=9, workers=3, block_size=1500)
        self.assertEqual(base.empirical_var, split.empirical_var)
        self.assertEqual(base.standard_error, split.standard_error)

    def test_invalid_correlation(self):
        with self.assertRaises(ValidationError):
            empirical_variance(NoiseModel(4, 1.0, 1.0, trials=1000))
        with self.assertRaises(ValidationError):
            empirical_variance(NoiseModel(4, 0.2, v_max=1.0, v_min=2.0, trials=1000))

    def test_csv_row(self):
        report = empirical_variance(NoiseModel(2, 0.0, 1.0, trials=1000), seed=0)
        row = report.csv_row()
        self.assertEqual(row[:5], [2, 0.0, 1.0, 1.0, 1000])
        self.assertIsInstance(row[-1], bool)

    def test_each_report_is_logged(self):
        with patch("analysis.variance.log_bound_report") as log_report:
            reports = containment_grid(horizons=(1, 2), rhos=(0.0,), variances=(1.0,), trials=2000, seed=1)
        self.assertEqual(log_report.call_count, 2)
        logged = log_report.call_args_list[1].kwargs
        self.assertEqual(logged, reports[1].to_dict())
        self.assertEqual(logged["n"], 2)


class TestPGM(unittest.TestCase):

    def test_flat_image_is_black(self):
        np.testing.assert_array_equal(to_gray(np.full((2, 3), 4.0)), np.zeros((2, 3)))

    def test_scaling(self):
        np.testing.assert_array_equal(to_gray(np.array([0.0, 0.5, 1.0])), [0, 128, 255])
        np.testing.assert_array_equal(to_gray(np.array([-1.0, 3.0]), (0.0, 2.0)), [0, 255])

    def test_write_and_read(self):
        values = np.arange(12, dtype=float).reshape(3, 4)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "img.pgm")
            write_pgm(path, values)
            with open(path) as f:
                self.assertEqual(f.readline().strip(), "P2")
            image = read_pgm(path)
        self.assertEqual(image.shape, (3, 4))
        self.assertEqual(image[0, 0], 0)
        self.assertEqual(image[-1, -1], 255)


class TestExports(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.env = ContactEnv(EnvConfig())
        cls.data = collect(TaskKind.MIXED, episodes=4, steps=20, seed=3)
        cls.snapshot = small_snapshot()
        cls.tmp = tempfile.TemporaryDirectory()

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_untrained_map_is_constant(self):
        snapshot = small_snapshot(zero=True)
        latent = filtered_latent_at(snapshot, self.data.trajectory(0), 5)
        qmap = qvalue_map(snapshot, latent, self.env, grid=(6, 4))
        self.assertEqual(qmap.shape, (4, 6))
        self.assertTrue(np.all(qmap.scores == qmap.scores[0, 0]))
        qmap.write_pgm(self.path("flat.pgm"))
        self.assertTrue(np.all(read_pgm(self.path("flat.pgm")) == 0))

    def test_map_files(self):
        latent = filtered_latent_at(self.snapshot, self.data.trajectory(1), 3)
        qmap = qvalue_map(self.snapshot, latent, self.env, grid=(5, 3), plan_config=PlanConfig(horizon=2))
        self.assertEqual(qmap.write_csv(self.path("qmap.csv")), 3)
        rows = read_csv(self.path("qmap.csv"))
        self.assertEqual(len(rows), 4)
        self.assertTrue(all(len(row) == 5 for row in rows))
        qmap.write_pgm(self.path("qmap.pgm"))
        self.assertEqual(read_pgm(self.path("qmap.pgm")).shape, (3, 5))
        x, z = qmap.argmax()
        self.assertIn(x, qmap.xs)
        self.assertIn(z, qmap.zs)

    def test_map_is_deterministic(self):
        latent = filtered_latent_at(self.snapshot, self.data.trajectory(2), 4)
        first = qvalue_map(self.snapshot, latent, self.env, grid=(4, 4))
        second = qvalue_map(self.snapshot, latent, self.env, grid=(4, 4))
        np.testing.assert_array_equal(first.scores, second.scores)

    def test_rollout_dump_file_count(self):
        for horizon in (0, 5):
            out = self.path(f"rollout_{horizon}")
            dump_rollout(self.snapshot, self.data.trajectory(0), out, start=2, horizon=horizon)
            files = sorted(os.listdir(out))
            self.assertEqual(len([f for f in files if f.endswith(".pgm")]), horizon + 2)
            self.assertEqual(len([f for f in files if f.endswith(".csv")]), horizon + 2)
            truth = read_pgm(os.path.join(out, "ground_truth.pgm"))
            self.assertEqual(truth.shape, (horizon + 1, OBS_DIM))

    def test_rollout_dump_too_long(self):
        with self.assertRaises(ShapeError):
            dump_rollout(self.snapshot, self.data.trajectory(0), self.path("bad"), start=10, horizon=10)

    def test_rollout_mse(self):
        accuracy = rollout_mse(self.snapshot, self.data, horizon=3)
        self.assertEqual(accuracy.model_mse.shape, (4,))
        self.assertEqual(accuracy.baseline_mse[0], 0.0)
        self.assertTrue(np.all(np.isfinite(accuracy.model_mse)))
        self.assertEqual(accuracy.write_csv(self.path("mse.csv")), 4)

    def test_latent_dump(self):
        snapshot = small_snapshot(h_dim=128, z_dim=32)
        path = self.path("latents.csv")
        count = dump_latents(snapshot, self.data, path)
        self.assertEqual(count, 4 * 20)
        rows = read_csv(path)
        self.assertEqual(len(rows[0]), 162)
        self.assertEqual(rows[1][:2], [TaskKind.from_code(int(self.data.tasks[0])).value, "0"])

        centroids, distances = latent_centroids(path)
        self.assertEqual(set(centroids), set(r[0] for r in rows[1:]))
        for vector in centroids.values():
            self.assertEqual(vector.shape, (32,))
        self.assertEqual(len(distances), len(centroids) * (len(centroids) - 1) // 2)

    def test_latent_dump_is_byte_identical(self):
        dump_latents(self.snapshot, self.data, self.path("a.csv"))
        dump_latents(self.snapshot, self.data, self.path("b.csv"))
        with open(self.path("a.csv"), "rb") as a, open(self.path("b.csv"), "rb") as b:
            self.assertEqual(a.read(), b.read())


if __name__ == '__main__':
    unittest.main()
