import math

import numpy as np
import pytest

from streakcnn.nn import (Adam, Network, TrainConfig, adam_step, bce_batch, bce_loss,
                          dropout_forward, init_weights, stream, train)
from streakcnn.errors import NumericError
from streakcnn.zoo import LayerSpec, ModelConfig

from conftest import max_rel_err, numerical_grad


def tiny_config(dropout=0.0):
    layers = [LayerSpec("conv", size=2), LayerSpec("relu"), LayerSpec("maxpool", size=2)]
    if dropout:
        layers.append(LayerSpec("dropout", p=dropout))
    layers += [LayerSpec("flatten"), LayerSpec("dense", size=4), LayerSpec("relu"),
               LayerSpec("dense", size=1), LayerSpec("sigmoid")]
    return ModelConfig("tiny", tuple(layers), input_shape=(1, 8, 8))


class TestBCE:
    def test_certain_and_right(self):
        loss, _ = bce_loss(1.0, 1)
        assert loss == -math.log(1.0 - 1e-12)
        assert loss < 1e-11

    @pytest.mark.parametrize("y", [0, 1])
    def test_half(self, y):
        assert bce_loss(0.5, y)[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_gradient_finite_difference(self):
        h = 1e-6
        numeric = (bce_loss(0.7 + h, 1)[0] - bce_loss(0.7 - h, 1)[0]) / (2 * h)
        _, analytic = bce_loss(0.7, 1)
        assert abs(analytic - numeric) / abs(analytic) < 1e-6

    def test_bad_label(self):
        with pytest.raises(ValueError):
            bce_loss(0.3, 2)

    def test_batch_matches_scalar(self):
        p, y = np.array([0.2, 0.9, 0.5]), np.array([1, 0, 1])
        loss, grad = bce_batch(p, y)
        scalar = [bce_loss(pi, int(yi)) for pi, yi in zip(p, y)]
        assert loss == pytest.approx(np.mean([s[0] for s in scalar]), rel=1e-14)
        np.testing.assert_allclose(grad, [s[1] / 3 for s in scalar], rtol=1e-14)


class TestAdam:
    def test_first_step(self):
        cfg = TrainConfig()
        new, (m, v) = adam_step(np.array([0.0]), np.array([1.0]), (np.zeros(1), np.zeros(1)), 1, cfg)
        assert new[0] == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)

    def test_zero_gradient_noop(self):
        params = np.array([0.3, -1.2])
        new, _ = adam_step(params, np.zeros(2), (np.zeros(2), np.zeros(2)), 1, TrainConfig())
        np.testing.assert_array_equal(new, params)

    def test_quadratic_descends(self):
        cfg = TrainConfig()
        theta, moments = np.array([1.0]), (np.zeros(1), np.zeros(1))
        prev = abs(theta[0])
        for t in range(1, 11):
            theta, moments = adam_step(theta, 2 * theta, moments, t, cfg)
            assert abs(theta[0]) < prev
            prev = abs(theta[0])

    def test_fused_matches_functional_exactly(self, rng):
        cfg = TrainConfig(learning_rate=0.01)
        p_ref = rng.normal(size=50)
        p = p_ref.copy()
        opt = Adam(50, cfg)
        moments = (np.zeros(50), np.zeros(50))
        for t in range(1, 6):
            g = rng.normal(size=50)
            p_ref, moments = adam_step(p_ref, g, moments, t, cfg)
            opt.step(p, g)
        assert p.tobytes() == p_ref.tobytes()
        assert opt.m.tobytes() == moments[0].tobytes()

    def test_shape_mismatch(self):
        from streakcnn.errors import ShapeError
        with pytest.raises(ShapeError):
            adam_step(np.zeros(2), np.zeros(3), (np.zeros(2), np.zeros(2)), 1, TrainConfig())

    def test_step_counter_starts_at_one(self):
        with pytest.raises(ValueError):
            adam_step(np.zeros(1), np.zeros(1), (np.zeros(1), np.zeros(1)), 0, TrainConfig())


class TestDropout:
    def test_eval_identity(self, rng):
        x = rng.normal(size=(3, 4))
        out, mask = dropout_forward(x, 0.4, "eval")
        assert out.tobytes() == x.tobytes() and mask is None

    @pytest.mark.parametrize("mode", ["train", "eval"])
    def test_p_zero_identity(self, rng, mode):
        x = rng.normal(size=10)
        out, _ = dropout_forward(x, 0.0, mode, rng)
        np.testing.assert_array_equal(out, x)

    def test_drop_fraction_and_expectation(self):
        x = np.ones(10**6)
        out, _ = dropout_forward(x, 0.4, "train", np.random.default_rng(0))
        zero_frac = np.mean(out == 0.0)
        assert 0.398 <= zero_frac <= 0.402
        # survivors scaled by 1/(1-p): mean stays near 1
        assert abs(out.mean() - 1.0) < 0.005

    def test_bad_p(self):
        with pytest.raises(ValueError):
            dropout_forward(np.ones(2), 1.0, "train", np.random.default_rng(0))


class TestInit:
    def test_same_seed_identical(self):
        a, _ = init_weights((8, 3, 3, 3), stream(5, 4, 0))
        b, _ = init_weights((8, 3, 3, 3), stream(5, 4, 0))
        assert a.tobytes() == b.tobytes()

    def test_he_std(self):
        w, b = init_weights((512, 4608), np.random.default_rng(1))
        expected = math.sqrt(2 / 4608)
        assert abs(w.std() - expected) / expected < 0.05
        assert not b.any()


class TestNetworkGradient:
    def test_end_to_end_finite_difference(self):
        rng = np.random.default_rng(3)
        net = Network.initialized(tiny_config(), seed=3)
        x = rng.random((2, 1, 8, 8))
        y = np.array([1, 0])

        def loss():
            p, _ = net.forward(x)
            return bce_batch(p.reshape(-1), y)[0]

        p, caches = net.forward(x)
        _, grad = bce_batch(p.reshape(-1), y)
        gin, gparams = net.backward(grad.reshape(p.shape), caches)
        numeric = numerical_grad(loss, net.params)
        assert max_rel_err(gparams, numeric, floor=1e-7) < 1e-5
        numeric_in = numerical_grad(loss, x)
        assert max_rel_err(gin, numeric_in, floor=1e-7) < 1e-5

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_loss_decreases_first_steps(self, seed):
        rng = np.random.default_rng(seed)
        net = Network.initialized(tiny_config(), seed=seed)
        x = rng.random((4, 1, 8, 8))
        y = np.array([1, 0, 1, 0])
        opt = Adam(net.size, TrainConfig(learning_rate=0.01))
        losses = []
        for _ in range(6):
            p, caches = net.forward(x)
            loss, grad = bce_batch(p.reshape(-1), y)
            losses.append(loss)
            _, g = net.backward(grad.reshape(p.shape), caches)
            opt.step(net.params, g)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_nonfinite_output_raises(self):
        net = Network.initialized(tiny_config(), seed=0)
        with pytest.raises(NumericError):
            net.forward(np.full((1, 8, 8), np.nan))


def separable_set(n, seed):
    """Bright left half vs bright right half."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.random((n, 8, 8)) * 0.2
    x[y == 1, :, :4] += 0.8
    x[y == 0, :, 4:] += 0.8
    return x, y


class TestTrain:
    def test_zero_epochs(self):
        net = Network.initialized(tiny_config(), seed=0)
        before = net.params.copy()
        x, y = separable_set(8, 0)
        _, state = train(net, (x, y), (x, y), None, TrainConfig(epochs=0))
        assert net.params.tobytes() == before.tobytes()
        assert state.history == []

    def test_separable_reaches_high_accuracy(self):
        x, y = separable_set(200, 1)
        net = Network.initialized(tiny_config(dropout=0.4), seed=1)
        _, state = train(net, (x, y), (x[:40], y[:40]), None, TrainConfig(epochs=30, seed=1))
        assert len(state.history) == 30
        assert state.history[-1].train_acc >= 0.99

    def test_deterministic_history(self):
        x, y = separable_set(40, 2)
        runs = []
        for _ in range(2):
            net = Network.initialized(tiny_config(dropout=0.4), seed=9)
            _, state = train(net, (x, y), (x, y), None, TrainConfig(epochs=3, seed=9))
            runs.append((net.params.tobytes(), [vars(r) for r in state.history]))
        assert runs[0] == runs[1]

    def test_resume_matches_uninterrupted(self):
        x, y = separable_set(40, 3)
        full = Network.initialized(tiny_config(dropout=0.4), seed=4)
        train(full, (x, y), (x, y), None, TrainConfig(epochs=2, seed=4))
        half = Network.initialized(tiny_config(dropout=0.4), seed=4)
        _, state = train(half, (x, y), (x, y), None, TrainConfig(epochs=1, seed=4))
        train(half, (x, y), (x, y), None, TrainConfig(epochs=1, seed=4), state=state)
        assert full.params.tobytes() == half.params.tobytes()
        assert [r.epoch for r in state.history] == [1, 2]

    def test_empty_dataset(self):
        net = Network.initialized(tiny_config(), seed=0)
        with pytest.raises(ValueError):
            train(net, (np.zeros((0, 8, 8)), np.zeros(0)), (np.zeros((0, 8, 8)), np.zeros(0)),
                  None, TrainConfig(epochs=1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_loss_names_step(self):
        net = Network.initialized(tiny_config(), seed=0)
        x, y = separable_set(8, 0)
        x[0, 0, 0] = np.inf
        with pytest.raises(NumericError, match="step"):
            train(net, (x, y), (x, y), None, TrainConfig(epochs=1, batch_size=8))
