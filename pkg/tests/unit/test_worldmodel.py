import math
import os
import sys
import tempfile
import unittest

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

from diffcore import Value, check_gradients, STD_FLOOR
from diffcore import tensor as T
from dataset import collect
from models import TaskKind, LatentState, OBS_DIM
from utils.error_handler import (
    IncompatibleModelError, FormatVersionError, TruncatedFileError, ShapeError, UsageError,
)
from worldmodel import (
    ModelConfig, WorldModel, SequenceBatch, loss_sequence, loss_terms, total_loss, train,
    filter_sequence, filter_step, open_loop_rollout, ModelSnapshot, save_model, load_model, cast_params,
)


def tiny_config(**overrides):
    values = dict(obs_dim=5, act_dim=3, h_dim=6, z_dim=3, encoder_widths=(7,), decoder_widths=(7,),
                  head_widths=(6,), posterior_width=5, seq_len=4, batch_size=2, seed=3)
    values.update(overrides)
    return ModelConfig(**values)


def random_batch(config, batch=2, length=4, seed=0):
    rng = np.random.default_rng(seed)
    dones = np.zeros((batch, length))
    return SequenceBatch(
        observations=rng.normal(size=(batch, length, config.obs_dim)),
        actions=rng.uniform(-1, 1, size=(batch, length, config.act_dim)),
        rewards=rng.normal(size=(batch, length)),
        dones=dones,
        mc_returns=rng.normal(size=(batch, length)),
    )


def leaves(params):
    return {name: Value(np.array(value), name=name) for name, value in params.items()}


class TestModelConfig(unittest.TestCase):

    def test_defaults(self):
        c = ModelConfig()
        self.assertEqual((c.h_dim, c.z_dim, c.obs_dim), (128, 32, 40))
        self.assertEqual(c.encoder_widths, (256, 128))
        self.assertEqual((c.batch_size, c.seq_len), (16, 32))

    def test_from_run_config_parses_widths(self):
        c = ModelConfig.from_run_config({"model.encoder_widths": "64,32", "model.h_dim": 16, "run.seed": 4})
        self.assertEqual(c.encoder_widths, (64, 32))
        self.assertEqual(c.h_dim, 16)
        self.assertEqual(c.seed, 4)

    def test_non_positive_width(self):
        with self.assertRaises(UsageError):
            ModelConfig(head_widths=(0,))

    def test_dict_round_trip(self):
        c = tiny_config(enable_reward_head=True)
        self.assertEqual(ModelConfig.from_dict(c.to_dict()), c)


class TestZeroParameters(unittest.TestCase):

    def setUp(self):
        self.config = tiny_config()
        self.model = WorldModel(self.config)
        self.params = self.model.zero_params()
        self.h = np.linspace(-1, 1, 6)
        self.z = np.array([0.3, -0.2, 0.1])
        self.a = np.array([0.5, -0.5, 0.0])

    def test_recurrence_halves_state(self):
        out = self.model.recurrence(self.params, self.h, self.z, self.a)
        np.testing.assert_allclose(out.data, 0.5 * self.h)

    def test_recurrence_is_deterministic(self):
        first = self.model.recurrence(self.params, self.h, self.z, self.a).data
        second = self.model.recurrence(self.params, self.h, self.z, self.a).data
        np.testing.assert_array_equal(first, second)

    def test_decoder_mean_is_zero(self):
        stats = self.model.decode(self.params, self.h, self.z)
        np.testing.assert_array_equal(stats.mean.data, np.zeros(5))
        np.testing.assert_array_equal(stats.std.data, np.ones(5))

    def test_termination_is_half(self):
        self.assertEqual(float(self.model.predict_termination(self.params, self.h, self.z).data), 0.5)

    def test_q_is_zero(self):
        self.assertEqual(float(self.model.predict_q(self.params, self.h, self.z, self.a).data), 0.0)

    def test_posterior_without_noise_is_mean(self):
        stats, z = self.model.posterior(self.params, self.h, np.ones(5))
        np.testing.assert_array_equal(z.data, stats.mean.data)
        np.testing.assert_allclose(stats.std.data, math.log(2.0) + STD_FLOOR)

    def test_hand_computed_two_step_loss(self):
        o = np.array([[[1.0, 0.0, -2.0, 0.5, 0.0], [0.0, 1.0, 1.0, 0.0, -1.0]]])
        mc = np.array([[1.5, 0.5]])
        batch = SequenceBatch(observations=o, actions=np.zeros((1, 2, 3)), rewards=np.zeros((1, 2)),
                              dones=np.zeros((1, 2)), mc_returns=mc)
        _, loss = loss_sequence(self.model, self.params, batch)
        half_log_2pi = 0.5 * math.log(2 * math.pi)
        rec_obs = np.mean([np.sum(0.5 * o[0, t] ** 2 + half_log_2pi) for t in range(2)])
        rec_term = math.log(2.0)
        q = np.mean(mc[0] ** 2)
        self.assertAlmostEqual(loss.rec_obs, rec_obs, places=12)
        self.assertAlmostEqual(loss.rec_term, rec_term, places=12)
        self.assertAlmostEqual(loss.jep, 0.0, places=12)
        self.assertAlmostEqual(loss.q, q, places=12)
        self.assertAlmostEqual(loss.total, rec_obs + rec_term + q, places=12)


class TestRandomParameters(unittest.TestCase):

    def setUp(self):
        self.config = tiny_config()
        self.model = WorldModel(self.config)
        self.params = self.model.init_params()

    def test_init_is_seeded(self):
        again = self.model.init_params()
        for name in self.params:
            np.testing.assert_array_equal(self.params[name], again[name])
        self.assertEqual(set(self.params), set(self.model.param_shapes()))

    def test_std_floor_on_extreme_inputs(self):
        stats, _ = self.model.prior(self.params, np.full(6, -50.0))
        self.assertTrue(np.all(stats.std.data >= STD_FLOOR))

    def test_different_observations_different_posterior(self):
        h = np.zeros(6)
        a, _ = self.model.posterior(self.params, h, np.ones(5))
        b, _ = self.model.posterior(self.params, h, -np.ones(5))
        self.assertFalse(np.allclose(a.mean.data, b.mean.data))

    def test_termination_strictly_inside_unit_interval(self):
        d = self.model.predict_termination(self.params, np.full((4, 6), 3.0), np.full((4, 3), -3.0)).data
        self.assertTrue(np.all((d > 0) & (d < 1)))

    def test_reward_head_required(self):
        with self.assertRaises(IncompatibleModelError):
            self.model.predict_reward(self.params, np.zeros(6), np.zeros(3), np.zeros(3))

    def test_check_params_rejects_wrong_shape(self):
        broken = dict(self.params)
        broken["q.0.w"] = np.zeros((2, 2))
        with self.assertRaises(ShapeError):
            self.model.check_params(broken)

    def test_float32_inference(self):
        p32 = cast_params(self.params, np.float32)
        h = np.zeros(6, dtype=np.float32)
        z = np.zeros(3, dtype=np.float32)
        a = np.zeros(3, dtype=np.float32)
        self.assertEqual(self.model.predict_q(p32, h, z, a).dtype, np.float32)
        self.assertEqual(self.model.recurrence(p32, h, z, a).dtype, np.float32)


class TestSequenceLoss(unittest.TestCase):

    def setUp(self):
        self.config = tiny_config()
        self.model = WorldModel(self.config)
        self.params = self.model.init_params()
        self.batch = random_batch(self.config)
        self.noise = np.random.default_rng(5).normal(size=(2, 4, 3))

    def test_total_is_sum_of_parts(self):
        _, loss = loss_sequence(self.model, self.params, self.batch, self.noise)
        self.assertLessEqual(abs(loss.total - loss.parts_sum()), 1e-10)

    def test_reward_term_included_when_enabled(self):
        config = tiny_config(enable_reward_head=True)
        model = WorldModel(config)
        _, loss = loss_sequence(model, model.init_params(), self.batch, self.noise)
        self.assertIsNotNone(loss.reward)
        self.assertIn("reward", loss.columns())
        self.assertLessEqual(abs(loss.total - loss.parts_sum()), 1e-10)

    def test_jep_is_zero_when_prior_equals_posterior(self):
        params = prior_tied_params(self.model, self.params)
        terms = loss_terms(self.model, params, self.batch, self.noise)
        self.assertAlmostEqual(terms["jep"].item(), 0.0, places=12)

    def test_first_kl_term_does_not_train_posterior(self):
        # later priors sit on a state built from earlier posterior samples
        batch = random_batch(self.config, length=6, seed=4)
        noise = np.random.default_rng(6).normal(size=(2, 6, 3))
        for seed in range(3):
            params = self.model.init_params(seed)
            vals = leaves(params)
            loss_terms(self.model, vals, batch, noise)["jep_prior"].backward()
            for name in self.model.group_names("posterior"):
                self.assertEqual(np.abs(vals[name].grad).max(), 0.0, name)
            for group in ("prior", "recurrence"):
                self.assertGreater(sum(np.abs(vals[n].grad).sum() for n in self.model.group_names(group)), 0.0)

    def test_first_kl_term_value_unchanged_by_detached_unroll(self):
        terms = loss_terms(self.model, self.params, self.batch, self.noise)
        self.assertAlmostEqual(terms["jep_prior"].item(), terms["jep_posterior"].item(), places=12)

    def test_second_kl_term_does_not_train_prior(self):
        vals = leaves(self.params)
        loss_terms(self.model, vals, self.batch, self.noise)["jep_posterior"].backward()
        for name in self.model.group_names("prior"):
            np.testing.assert_array_equal(vals[name].grad, 0.0, err_msg=name)
        self.assertGreater(sum(np.abs(vals[n].grad).sum() for n in self.model.group_names("posterior")), 0.0)

    def test_steps_after_terminal_are_ignored(self):
        batch = random_batch(self.config, length=6, seed=2)
        batch.dones[0, 2:] = 1.0
        noise = np.random.default_rng(1).normal(size=(2, 6, 3))
        _, before = loss_sequence(self.model, self.params, batch, noise)
        batch.observations[0, 3:] += 7.0
        batch.actions[0, 3:] = -batch.actions[0, 3:]
        batch.rewards[0, 3:] = 100.0
        _, after = loss_sequence(self.model, self.params, batch, noise)
        self.assertEqual(before.to_dict(), after.to_dict())

    def test_shape_mismatch(self):
        batch = random_batch(self.config)
        batch.actions = batch.actions[:, :, :2]
        with self.assertRaises(ShapeError):
            loss_sequence(self.model, self.params, batch)

    def test_loss_gradients_match_finite_differences(self):
        config = tiny_config(enable_reward_head=True)
        model = WorldModel(config)
        params = model.init_params()
        batch = random_batch(config, length=3, seed=8)
        batch.dones[1, 1:] = 1.0
        noise = np.random.default_rng(9).normal(size=(2, 3, 3))

        def unrolled(p):
            terms = loss_terms(model, p, batch, noise)
            return T.add(T.add(T.add(terms["rec_obs"], terms["rec_term"]), terms["q"]), terms["reward"])

        report = check_gradients(unrolled, params, num_samples=150, rng=np.random.default_rng(0))
        self.assertGreaterEqual(report.checked, 100)
        self.assertTrue(report.passed, report.failures[:3])

    def test_single_step_total_matches_finite_differences(self):
        # the detached KL pair equals the full KL derivative only when no prior sits downstream of a sample
        config = tiny_config(enable_reward_head=True)
        model = WorldModel(config)
        batch = random_batch(config, length=1, seed=8)
        noise = np.random.default_rng(9).normal(size=(2, 1, 3))
        report = check_gradients(lambda p: total_loss(loss_terms(model, p, batch, noise)), model.init_params(),
                                 num_samples=150, rng=np.random.default_rng(0))
        self.assertTrue(report.passed, report.failures[:3])

    def test_recurrence_gradient_wrt_action(self):
        h = np.random.default_rng(1).normal(size=6)
        z = np.random.default_rng(2).normal(size=3)
        report = check_gradients(
            lambda p: T.vsum(T.square(self.model.recurrence(self.params, h, z, p["a"]))),
            {"a": np.array([0.2, -0.4, 0.7])},
        )
        self.assertTrue(report.passed, report.failures)


def prior_tied_params(model, params):
    """Posterior that ignores the observation and copies the prior network."""
    tied = dict(params)
    enc_dim = model.config.encoding_dim
    tied["posterior.0.w"] = np.vstack([params["prior.0.w"], np.zeros((enc_dim, params["prior.0.w"].shape[1]))])
    tied["posterior.0.b"] = params["prior.0.b"].copy()
    tied["posterior.1.w"] = params["prior.1.w"].copy()
    tied["posterior.1.b"] = params["prior.1.b"].copy()
    return tied


class TestRollouts(unittest.TestCase):

    def setUp(self):
        self.config = tiny_config()
        self.model = WorldModel(self.config)
        self.params = self.model.init_params()
        rng = np.random.default_rng(4)
        self.observations = rng.normal(size=(6, 5))
        self.actions = rng.uniform(-1, 1, size=(6, 3))

    def test_zero_horizon_is_reconstruction(self):
        result = open_loop_rollout(self.model, self.params, self.observations[0], np.zeros((0, 3)))
        self.assertEqual(result.predictions.shape, (1, 5))
        _, z = self.model.posterior(self.params, np.zeros(6), self.observations[0])
        np.testing.assert_array_equal(result.predictions[0], self.model.decode(self.params, np.zeros(6), z).mean.data)

    def test_rollout_length(self):
        result = open_loop_rollout(self.model, self.params, self.observations[0], self.actions[:4])
        self.assertEqual(result.predictions.shape, (5, 5))
        self.assertEqual(result.horizon, 4)

    def test_filter_and_imagination_agree_when_prior_matches_posterior(self):
        tied = prior_tied_params(self.model, self.params)
        filtered = filter_sequence(self.model, tied, self.observations, self.actions)
        imagined = open_loop_rollout(self.model, tied, self.observations[0], self.actions[:5])
        for f, i in zip(filtered, imagined.latents):
            np.testing.assert_allclose(f.h, i.h, atol=1e-12)
            np.testing.assert_allclose(f.z, i.z, atol=1e-12)

    def test_filter_step_chain_matches_sequence(self):
        states = filter_sequence(self.model, self.params, self.observations[:3], self.actions[:2])
        state = filter_step(self.model, self.params, None, None, self.observations[0])
        state = filter_step(self.model, self.params, state, self.actions[0], self.observations[1])
        np.testing.assert_array_equal(state.h, states[1].h)
        self.assertTrue(isinstance(states[2], LatentState) and states[2].is_finite())

    def test_filter_rejects_wrong_observation_dim(self):
        with self.assertRaises(ShapeError):
            filter_step(self.model, self.params, None, None, np.zeros(4))


class TestTraining(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data = collect(TaskKind.WALL, 6, 40, seed=1)
        cls.config = ModelConfig(h_dim=12, z_dim=4, encoder_widths=(16,), decoder_widths=(16,), head_widths=(12,),
                                 posterior_width=12, seq_len=8, batch_size=4, epochs=4, learning_rate=3e-3, seed=2)

    def test_loss_goes_down(self):
        result = train(self.data, self.config)
        self.assertEqual(len(result.history), 4)
        self.assertLess(result.history[-1].total, result.history[0].total)

    def test_same_seed_same_parameters(self):
        config = self.config.with_overrides(epochs=1)
        a = train(self.data, config).params
        b = train(self.data, config).params
        for name in a:
            np.testing.assert_array_equal(a[name], b[name], err_msg=name)

    def test_mixed_dataset_uses_same_path(self):
        mixed = collect(TaskKind.MIXED, 4, 40, seed=2)
        result = train(mixed, self.config.with_overrides(epochs=1, max_updates_per_epoch=2))
        self.assertEqual(result.updates, 2)

    def test_training_log_columns(self):
        config = self.config.with_overrides(epochs=2, max_updates_per_epoch=1, enable_reward_head=True)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "log.csv")
            train(self.data, config, log_path=path)
            with open(path) as f:
                lines = f.read().splitlines()
        self.assertEqual(lines[0], "epoch,total,rec_obs,rec_term,jep,q,reward")
        self.assertEqual(len(lines), 3)

    def test_dimension_mismatch(self):
        # 38 is the miscounted observation size; any obs_dim but the collected one is rejected
        with self.assertRaises(IncompatibleModelError):
            train(self.data, self.config.with_overrides(obs_dim=OBS_DIM - 2))

    def test_collected_observation_size(self):
        self.assertEqual(OBS_DIM, 40)
        self.assertEqual(self.data.observations.shape[-1], OBS_DIM)
        self.assertEqual(self.data.header.obs_dim, OBS_DIM)


class TestModelStorage(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "model.lwm")
        config = tiny_config(enable_reward_head=True)
        self.snapshot = ModelSnapshot(config=config, params=WorldModel(config).init_params(),
                                      dataset_hash="ab" * 32, env_hash="cd" * 8)
        save_model(self.path, self.snapshot)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        loaded = load_model(self.path)
        self.assertEqual(loaded.config, self.snapshot.config)
        self.assertEqual(loaded.dataset_hash, self.snapshot.dataset_hash)
        self.assertEqual(loaded.env_hash, self.snapshot.env_hash)
        for name, value in self.snapshot.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_bad_magic(self):
        with open(self.path, "r+b") as f:
            f.write(b"NOPE")
        with self.assertRaises(FormatVersionError):
            load_model(self.path)

    def test_truncated(self):
        with open(self.path, "rb") as f:
            raw = f.read()
        with open(self.path, "wb") as f:
            f.write(raw[:-10])
        with self.assertRaises(TruncatedFileError):
            load_model(self.path)

    def test_architecture_mismatch(self):
        with self.assertRaises(IncompatibleModelError):
            load_model(self.path, expected=tiny_config(h_dim=9))

    def test_environment_mismatch(self):
        with self.assertRaises(IncompatibleModelError):
            self.snapshot.check_env("ef" * 8)

    def test_float32_cache(self):
        p32 = self.snapshot.inference_params(np.float32)
        self.assertIs(p32, self.snapshot.inference_params(np.float32))
        self.assertTrue(all(v.dtype == np.float32 for v in p32.values()))


if __name__ == '__main__':
    unittest.main()
