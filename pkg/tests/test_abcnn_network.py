import json

import numpy as np
import pytest

from bystander.abcnn import (
    AdaptedWeights,
    CheckpointError,
    MicroNetwork,
    backprop,
    classify,
    forward,
    gradient_check,
    gradient_check_details,
    load_checkpoint,
    save_checkpoint,
    weighted_loss,
)


def relu(x):
    return x if x > 0 else 0.0


class TestForward:
    def test_zero_network(self):
        net = MicroNetwork.zeros((5, 7, 3))
        out = forward(net, np.arange(5.0))
        np.testing.assert_array_equal(out, np.zeros(3))
        np.testing.assert_array_equal(classify(out), [-1, -1, -1])

    def test_identity_layer(self):
        net = MicroNetwork((4, 4), [np.eye(4)], [np.zeros(4)])
        x = np.array([0.5, -2.0, 3.0, 0.0])
        np.testing.assert_array_equal(forward(net, x), x)

    def test_hand_computed(self):
        # 2 -> 2 (relu) -> 1, evaluated element by element
        w1 = [[1.0, -2.0], [0.5, 1.0]]
        b1 = [0.1, -0.3]
        w2 = [[2.0], [-1.0]]
        b2 = [0.25]
        net = MicroNetwork((2, 2, 1), [np.array(w1), np.array(w2)], [np.array(b1), np.array(b2)])
        x = [1.0, 2.0]
        h0 = relu(x[0] * w1[0][0] + x[1] * w1[1][0] + b1[0])  # 1 + 1 + 0.1 = 2.1
        h1 = relu(x[0] * w1[0][1] + x[1] * w1[1][1] + b1[1])  # -2 + 2 - 0.3 -> 0
        expected = h0 * w2[0][0] + h1 * w2[1][0] + b2[0]
        assert expected == pytest.approx(4.45)
        assert forward(net, x)[0] == pytest.approx(expected, abs=1e-15)

    def test_batch_matches_rows(self):
        net = MicroNetwork.initialize((3, 6, 2), seed=4)
        x = np.random.default_rng(1).normal(size=(5, 3))
        batch = forward(net, x)
        for j in range(5):
            np.testing.assert_allclose(batch[j], forward(net, x[j]), rtol=0, atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(MicroNetwork.zeros((3, 2)), np.zeros(4))

    def test_initialization_bounds_and_determinism(self):
        a = MicroNetwork.initialize((10, 20, 4), seed=9)
        b = MicroNetwork.initialize((10, 20, 4), seed=9)
        assert a == b
        limit = np.sqrt(6.0 / 30)
        assert np.all(np.abs(a.weights[0]) <= limit)
        assert a.n_parameters == 10 * 20 + 20 + 20 * 4 + 4


class TestBackprop:
    def test_output_gradient_zero_at_exact_fit(self):
        net = MicroNetwork((2, 2), [np.eye(2)], [np.zeros(2)])
        x = np.array([1.0, -1.0])
        loss, gw, gb = backprop(net, x, x.astype(int), AdaptedWeights.unit(2))
        assert loss == 0.0
        np.testing.assert_array_equal(gb[0], [0.0, 0.0])
        np.testing.assert_array_equal(gw[0], np.zeros((2, 2)))

    def test_loss_value_matches_forward(self):
        net = MicroNetwork.initialize((4, 5, 3), seed=2)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(7, 4))
        y = rng.choice([-1, 1], size=(7, 3))
        w = AdaptedWeights(rng.uniform(0.5, 1.5, 3), rng.uniform(0.5, 1.5, 3))
        loss, _, _ = backprop(net, x, y, w)
        assert loss == pytest.approx(weighted_loss(forward(net, x), y, w), rel=1e-14)

    def test_independent_finite_differences(self):
        # oracle perturbs a flat copy of every parameter and re-runs forward
        rng = np.random.default_rng(5)
        net = MicroNetwork.initialize((3, 4, 2), seed=3)
        x = rng.normal(size=(4, 3))
        y = rng.choice([-1, 1], size=(4, 2))
        w = AdaptedWeights(np.array([1.2, 0.8]), np.array([0.6, 1.4]))
        _, gw, gb = backprop(net, x, y, w)
        analytic = np.concatenate([g.ravel() for pair in zip(gw, gb) for g in pair])
        params = net.parameters()
        numeric = []
        h = 1e-6
        for p in params:
            flat = p.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                lp = weighted_loss(forward(net, x), y, w)
                flat[j] = orig - h
                lm = weighted_loss(forward(net, x), y, w)
                flat[j] = orig
                numeric.append((lp - lm) / (2 * h))
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-6)


class TestGradientCheck:
    def test_zero_single_layer(self):
        net = MicroNetwork.zeros((6, 3))
        sample = (np.random.default_rng(0).normal(size=6), np.array([1, -1, 1]))
        w = AdaptedWeights(np.array([1.5, 0.5, 1.0]), np.array([0.7, 1.3, 1.0]))
        assert gradient_check(net, sample, w, 1e-4) < 1e-6

    def test_random_two_hidden_layers(self):
        rng = np.random.default_rng(21)
        net = MicroNetwork.initialize((12, 32, 24, 5), seed=rng)
        sample = (rng.normal(size=12), rng.choice([-1, 1], 5))
        w = AdaptedWeights(rng.uniform(0.3, 1.7, 5), rng.uniform(0.3, 1.7, 5))
        res = gradient_check_details(net, sample, w, 1e-4)
        assert res.max_relative_error < 1e-4
        assert res.checked > 0.9 * net.n_parameters

    def test_detects_wrong_gradient(self, monkeypatch):
        import bystander.abcnn.network as network

        net = MicroNetwork.initialize((4, 3), seed=0)
        sample = (np.ones(4), np.array([1, -1, 1]))
        real = network.loss_gradient
        monkeypatch.setattr(network, "loss_gradient", lambda f, y, w: 1.1 * real(f, y, w))
        assert gradient_check(net, sample, AdaptedWeights.unit(3)) > 1e-2

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            gradient_check(MicroNetwork.zeros((2, 1)), (np.zeros(2), np.array([1])), AdaptedWeights.unit(1), 0.0)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        net = MicroNetwork.initialize((7, 5, 3), seed=8)
        net.biases[0] += 0.1
        path = tmp_path / "net.json"
        save_checkpoint(net, path)
        assert load_checkpoint(path) == net

    def test_layout_row_major(self, tmp_path):
        w = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        net = MicroNetwork((2, 3), [w], [np.array([7.0, 8.0, 9.0])])
        path = tmp_path / "net.json"
        save_checkpoint(net, path)
        doc = json.loads(path.read_text())
        assert doc["layer_sizes"] == [2, 3]
        assert doc["parameters"] == [[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]

    def test_bad_files(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)
        bad.write_text(json.dumps({"format": "bystander-mlp", "version": 1, "layer_sizes": [2, 1], "parameters": [[1.0], [0.0]]}))
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)
        bad.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)
