import io
import math
import unittest
import sys
import os

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

from diffcore import (
    Value, no_grad, stop_gradient, GaussianStats, gaussian_kl, gaussian_nll, bce,
    probability_to_logit, reparam_sample, mlp_forward, gru_cell, MLPSpec, GRUSpec,
    AdamState, adam_step, check_gradients,
)
from diffcore import tensor as T
from diffcore.layers import GRU_KEYS
from diffcore.serialization import write_params, read_params, save_params, load_params
from utils.error_handler import ShapeError, FormatVersionError, DimensionMismatchError, TruncatedFileError


def gauss(mean, std):
    return GaussianStats(Value(np.array(mean, dtype=float)), Value(np.array(std, dtype=float)))


class TestValueTape(unittest.TestCase):
    """Core tape behaviour"""

    def test_grad_matches_shape_before_backward(self):
        v = Value(np.ones((2, 3)))
        self.assertEqual(v.grad.shape, (2, 3))
        self.assertTrue(np.all(v.grad == 0))

    def test_unreachable_node_keeps_zero_grad(self):
        x = Value(2.0)
        y = Value(3.0)
        (x * x).backward()
        self.assertEqual(float(x.grad), 4.0)
        self.assertEqual(float(y.grad), 0.0)

    def test_shared_subexpression_accumulates(self):
        x = Value(3.0)
        a = x * 2.0
        (a * a + a).backward()
        # d/dx (4x^2 + 2x) = 8x + 2
        self.assertEqual(float(x.grad), 26.0)

    def test_backward_needs_scalar(self):
        with self.assertRaises(ShapeError):
            Value(np.ones(3)).backward()

    def test_broadcast_gradient_is_summed(self):
        x = Value(np.ones((4, 3)))
        b = Value(np.zeros(3))
        (x + b).sum().backward()
        np.testing.assert_array_equal(b.grad, np.full(3, 4.0))

    def test_matmul_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            T.matmul(Value(np.ones(3)), Value(np.ones((4, 2))))

    def test_no_grad_records_nothing(self):
        x = Value(1.0)
        with no_grad():
            y = x * 3.0
        self.assertEqual(y._parents, ())

    def test_float32_stays_float32(self):
        x = Value(np.ones(3, dtype=np.float32))
        y = (x * 0.5 + 1.0) / 2.0 - 0.1
        self.assertEqual(y.dtype, np.float32)

    def test_forward_is_pure(self):
        rng = np.random.default_rng(1)
        spec = MLPSpec("m", (5, 7, 2), "tanh")
        params = spec.init(rng)
        x = rng.normal(size=(3, 5))
        first = spec(params, x).data
        second = spec(params, x).data
        self.assertEqual(first.tobytes(), second.tobytes())


class TestStopGradient(unittest.TestCase):

    def test_identity_forward(self):
        self.assertEqual(stop_gradient(Value(3.0)).item(), 3.0)

    def test_product_with_one_branch_blocked(self):
        x = Value(2.0)
        (stop_gradient(x) * x).backward()
        self.assertEqual(float(x.grad), 2.0)

    def test_fully_blocked_branch(self):
        x = Value(5.0)
        out = stop_gradient(x * x) + 0.0 * x
        out.backward()
        self.assertEqual(float(x.grad), 0.0)


class TestGaussianMath(unittest.TestCase):

    def test_kl_identical_is_zero(self):
        self.assertEqual(gaussian_kl(gauss([0.0], [1.0]), gauss([0.0], [1.0])).item(), 0.0)

    def test_kl_shifted_mean(self):
        self.assertAlmostEqual(gaussian_kl(gauss([1.0], [1.0]), gauss([0.0], [1.0])).item(), 0.5, places=12)

    def test_kl_wider_posterior(self):
        expected = math.log(0.5) + 4.0 / 2.0 - 0.5
        self.assertAlmostEqual(gaussian_kl(gauss([0.0], [2.0]), gauss([0.0], [1.0])).item(), expected, places=12)
        self.assertAlmostEqual(expected, 0.80685, places=5)

    def test_kl_non_negative_on_random_draws(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            q = gauss(rng.normal(size=6), rng.uniform(0.1, 3.0, size=6))
            p = gauss(rng.normal(size=6), rng.uniform(0.1, 3.0, size=6))
            self.assertGreaterEqual(gaussian_kl(q, p).item(), 0.0)

    def test_kl_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            gaussian_kl(gauss([0.0, 0.0], [1.0, 1.0]), gauss([0.0], [1.0]))

    def test_nll_at_mean(self):
        value = gaussian_nll(np.array([0.3]), gauss([0.3], [1.0])).item()
        self.assertAlmostEqual(value, 0.5 * math.log(2 * math.pi), places=12)
        self.assertAlmostEqual(value, 0.91894, places=5)

    def test_nll_one_std_away(self):
        value = gaussian_nll(np.array([1.3]), gauss([0.3], [1.0])).item()
        self.assertAlmostEqual(value, 0.5 * math.log(2 * math.pi) + 0.5, places=12)

    def test_nll_gradient_zero_at_mean(self):
        stats = gauss([0.7], [1.0])
        gaussian_nll(np.array([0.7]), stats).backward()
        self.assertEqual(float(stats.mean.grad[0]), 0.0)

    def test_nll_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            gaussian_nll(np.zeros(3), gauss([0.0], [1.0]))

    def test_from_raw_floors_std(self):
        raw = Value(np.array([0.0, -1e6]))
        stats = GaussianStats.from_raw(raw, 1)
        self.assertGreaterEqual(float(stats.std.data[0]), 1e-4)


class TestBinaryCrossEntropy(unittest.TestCase):

    def test_half_probability(self):
        self.assertAlmostEqual(bce(Value(0.0), 1.0).item(), math.log(2.0), places=12)

    def test_confident_correct_prediction(self):
        self.assertLess(bce(Value(probability_to_logit(1.0 - 1e-12)), 1.0).item(), 1e-11)

    def test_confident_wrong_prediction(self):
        value = bce(Value(probability_to_logit(0.9)), 0.0).item()
        self.assertAlmostEqual(value, -math.log(0.1), places=9)

    def test_extreme_logits_stay_finite(self):
        self.assertTrue(np.isfinite(bce(Value(np.array([1e4, -1e4])), np.array([0.0, 1.0])).data).all())


class TestReparamSample(unittest.TestCase):

    def test_zero_noise_is_mean(self):
        stats = gauss([0.25, -1.5], [0.3, 2.0])
        z = reparam_sample(stats, np.zeros(2))
        np.testing.assert_array_equal(z.data, stats.mean.data)

    def test_linear_map(self):
        self.assertEqual(reparam_sample(gauss([0.0], [2.0]), np.array([1.5])).data[0], 3.0)

    def test_gradient_wrt_std(self):
        stats = gauss([0.0], [2.0])
        reparam_sample(stats, np.array([1.5])).sum().backward()
        self.assertEqual(float(stats.std.grad[0]), 1.5)
        self.assertEqual(float(stats.mean.grad[0]), 1.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeError):
            reparam_sample(gauss([0.0], [1.0]), np.zeros(2))


class TestLayers(unittest.TestCase):

    def test_zero_mlp_tanh_is_zero(self):
        layers = [(np.zeros((3, 4)), np.zeros(4)), (np.zeros((4, 2)), np.zeros(2))]
        out = mlp_forward(layers, np.array([1.0, -2.0, 3.0]), "tanh", "tanh")
        np.testing.assert_array_equal(out.data, np.zeros(2))

    def test_identity_single_layer(self):
        x = np.array([0.5, -0.25, 2.0])
        out = mlp_forward([(np.eye(3), np.zeros(3))], x, "tanh", "none")
        np.testing.assert_array_equal(out.data, x)

    def test_hand_set_two_layer_net(self):
        w1 = np.array([[1.0, 2.0], [3.0, 4.0]])
        b1 = np.array([0.5, -0.5])
        w2 = np.array([[1.0], [-2.0]])
        b2 = np.array([0.1])
        out = mlp_forward([(w1, b1), (w2, b2)], np.array([1.0, -1.0]), "tanh", "none")
        hidden = [math.tanh(1.0 * 1 + 3.0 * -1 + 0.5), math.tanh(2.0 * 1 + 4.0 * -1 - 0.5)]
        expected = hidden[0] * 1.0 + hidden[1] * -2.0 + 0.1
        self.assertAlmostEqual(float(out.data[0]), expected, places=14)

    def test_mlp_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            mlp_forward([(np.zeros((3, 2)), np.zeros(2))], np.zeros(4))

    def test_unknown_activation(self):
        with self.assertRaises(ValueError):
            mlp_forward([(np.eye(2), np.zeros(2))], np.zeros(2), "relu6")

    def test_gru_zero_weights_halves_state(self):
        params = {k: np.zeros((5, 3)) if k.startswith("w") else np.zeros(3) for k in GRU_KEYS}
        h = np.array([0.4, -1.0, 2.0])
        out = gru_cell(params, h, np.array([1.0, 2.0]))
        np.testing.assert_allclose(out.data, 0.5 * h, rtol=0, atol=1e-15)

    def test_gru_closed_update_gate_freezes_state(self):
        rng = np.random.default_rng(0)
        params = GRUSpec("g", 2, 3).init(rng)
        params["g.b_u"] = np.full(3, -200.0)
        h = np.array([0.4, -1.0, 2.0])
        out = GRUSpec("g", 2, 3)(params, h, np.array([1.0, 2.0]))
        np.testing.assert_allclose(out.data, h, atol=1e-12)

    def test_gru_shape_mismatch(self):
        params = {k: np.zeros((4, 3)) if k.startswith("w") else np.zeros(3) for k in GRU_KEYS}
        with self.assertRaises(ShapeError):
            gru_cell(params, np.zeros(3), np.zeros(2))

    def test_gru_batched_matches_single(self):
        spec = GRUSpec("g", 2, 4)
        params = spec.init(np.random.default_rng(5))
        rng = np.random.default_rng(6)
        h = rng.normal(size=(3, 4))
        x = rng.normal(size=(3, 2))
        batched = spec(params, h, x).data
        for i in range(3):
            np.testing.assert_allclose(spec(params, h[i], x[i]).data, batched[i], rtol=1e-14, atol=1e-15)


class TestFiniteDifferenceGradients(unittest.TestCase):
    """Tape gradients vs central differences at 64-bit precision"""

    def assert_gradients(self, loss_fn, params, samples=100):
        report = check_gradients(loss_fn, params, num_samples=samples, rng=np.random.default_rng(11))
        self.assertGreaterEqual(report.checked, min(samples, sum(v.size for v in params.values())))
        self.assertTrue(report.passed, f"worst {report.worst} rel={report.max_rel_error} failures={report.failures[:3]}")

    def test_gru_cell_gradients(self):
        rng = np.random.default_rng(2)
        spec = GRUSpec("g", 4, 5)
        params = spec.init(rng)
        for k in params:
            params[k] = params[k] + 0.1 * rng.normal(size=params[k].shape)
        params["h"] = rng.normal(size=(2, 5))
        params["x"] = rng.normal(size=(2, 4))
        target = rng.normal(size=(2, 5))

        def loss(p):
            out = spec(p, p["h"], p["x"])
            return T.square(out - target).sum()

        self.assert_gradients(loss, params, samples=150)

    def test_mlp_gradients_with_elu_and_tanh(self):
        rng = np.random.default_rng(4)
        spec = MLPSpec("m", (6, 10, 8, 3), "elu", "tanh")
        params = spec.init(rng)
        x = rng.normal(size=(4, 6))

        def loss(p):
            return T.square(spec(p, x)).mean()

        self.assert_gradients(loss, params, samples=120)

    def test_distribution_gradients(self):
        rng = np.random.default_rng(8)
        params = {
            "qm": rng.normal(size=(3, 4)), "qs": rng.normal(size=(3, 4)),
            "pm": rng.normal(size=(3, 4)), "ps": rng.normal(size=(3, 4)),
            "om": rng.normal(size=(3, 6)), "logit": rng.normal(size=3),
        }
        x = rng.normal(size=(3, 6))
        noise = rng.normal(size=(3, 4))
        done = np.array([0.0, 1.0, 0.0])

        def loss(p):
            q = GaussianStats(p["qm"], T.softplus(p["qs"]) + 1e-4)
            pr = GaussianStats(p["pm"], T.softplus(p["ps"]) + 1e-4)
            z = reparam_sample(q, noise)
            obs = GaussianStats(p["om"], Value(np.ones((3, 6))))
            total = (gaussian_kl(q.detached(), pr) + gaussian_kl(q, pr.detached())
                     + gaussian_nll(x, obs) + bce(p["logit"], done) + T.square(z).sum(axis=-1))
            return total.mean()

        self.assert_gradients(loss, params, samples=100)

    def test_elementwise_primitives(self):
        rng = np.random.default_rng(9)
        params = {"a": rng.uniform(0.5, 2.0, size=(5, 4)), "b": rng.uniform(0.5, 2.0, size=4)}

        def loss(p):
            a, b = p["a"], p["b"]
            y = T.exp(T.tanh(a) * 0.3) / (b + 1.0) - T.log(a) * T.sigmoid(b) + T.power(a, 1.5)
            y = T.concat([y, T.reshape(a, (4, 5))[:1, :4] * b], axis=0)
            return (y[1:3] * 2.0).sum() + T.elu(y - 1.0).mean()

        self.assert_gradients(loss, params, samples=24)


class TestAdam(unittest.TestCase):

    def test_first_step_is_bias_corrected(self):
        state = AdamState.for_params({"w": np.zeros(1)}, lr=1e-3)
        new, new_state = adam_step(state, {"w": np.zeros(1)}, {"w": np.ones(1)})
        self.assertAlmostEqual(float(new["w"][0]), -1e-3 / (1.0 + 1e-8), places=15)
        self.assertAlmostEqual(float(new["w"][0]), -9.99999e-4, places=8)
        self.assertEqual(new_state.step, 1)
        self.assertEqual(state.step, 0)

    def test_zero_gradient_leaves_params(self):
        params = {"w": np.array([0.5, -2.0])}
        state = AdamState.for_params(params)
        for _ in range(5):
            params, state = adam_step(state, params, {"w": np.zeros(2)})
        np.testing.assert_array_equal(params["w"], np.array([0.5, -2.0]))
        self.assertEqual(state.step, 5)

    def test_identical_calls_bitwise_identical(self):
        rng = np.random.default_rng(0)
        params = {"w": rng.normal(size=(3, 3))}
        grads = {"w": rng.normal(size=(3, 3))}
        state = AdamState.for_params(params)
        a, _ = adam_step(state, params, grads)
        b, _ = adam_step(state, params, grads)
        self.assertEqual(a["w"].tobytes(), b["w"].tobytes())

    def test_shape_mismatch(self):
        state = AdamState.for_params({"w": np.zeros(2)})
        with self.assertRaises(ShapeError):
            adam_step(state, {"w": np.zeros(2)}, {"w": np.zeros(3)})


class TestParameterFiles(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.params = {"enc.0.w": rng.normal(size=(3, 2)), "enc.0.b": rng.normal(size=2), "scale": np.array(1.5)}

    def test_round_trip_is_exact(self):
        buf = io.BytesIO()
        write_params(buf, self.params)
        buf.seek(0)
        loaded = read_params(buf, {k: v.shape for k, v in self.params.items()})
        for k, v in self.params.items():
            self.assertEqual(loaded[k].tobytes(), v.tobytes())

    def test_bad_magic(self):
        with self.assertRaises(FormatVersionError):
            read_params(io.BytesIO(b"XXXX\x00\x00\x00\x00"))

    def test_truncated(self):
        buf = io.BytesIO()
        write_params(buf, self.params)
        with self.assertRaises(TruncatedFileError):
            read_params(io.BytesIO(buf.getvalue()[:-3]))

    def test_shape_validation(self):
        buf = io.BytesIO()
        write_params(buf, self.params)
        buf.seek(0)
        with self.assertRaises(DimensionMismatchError):
            read_params(buf, {"enc.0.w": (2, 3), "enc.0.b": (2,), "scale": ()})

    def test_save_and_load_path(self):
        import tempfile
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "p.lwm")
            save_params(path, self.params)
            loaded = load_params(path)
        np.testing.assert_array_equal(loaded["enc.0.w"], self.params["enc.0.w"])


if __name__ == '__main__':
    unittest.main()
