"""Training: gradients vs finite differences, LM schedule, descent, adapt."""

import numpy as np
import pytest

from reachlearn.errors import ConfigError, ContractError
from reachlearn.nets import Network, build_network, classify, forward, init_nguyen_widrow
from reachlearn.train import (
    DEFAULT_ADAPT_RATES,
    TrainConfig,
    adapt,
    gradient,
    loss_value,
    train,
)


def _random_net(sizes, acts, seed):
    rng = np.random.default_rng(seed)
    weights = tuple(
        rng.normal(scale=0.7, size=(sizes[i + 1], sizes[i]))
        for i in range(len(sizes) - 1)
    )
    biases = tuple(rng.normal(scale=0.3, size=sizes[i + 1]) for i in range(len(sizes) - 1))
    return Network(
        layer_sizes=tuple(sizes),
        activations=tuple(acts),
        weights=weights,
        biases=biases,
        x_min=-np.ones(sizes[0]),
        x_max=np.ones(sizes[0]),
    )


def _fd_check(net, X, y, loss, eps, rtol, rng, n_probes=12):
    """Central finite differences on a random parameter subset."""
    gw, gb, _ = gradient(net, X, y, loss)
    worst = 0.0
    for _ in range(n_probes):
        layer = int(rng.integers(len(net.weights)))
        in_weights = bool(rng.integers(2))
        arr = net.weights[layer] if in_weights else net.biases[layer]
        flat_idx = int(rng.integers(arr.size))
        idx = np.unravel_index(flat_idx, arr.shape)

        def perturbed(sign):
            ws = [w.copy() for w in net.weights]
            bs = [b.copy() for b in net.biases]
            (ws if in_weights else bs)[layer][idx] += sign * eps
            return net.with_parameters(ws, bs)

        fd = (
            loss_value(perturbed(+1), X, y, loss) - loss_value(perturbed(-1), X, y, loss)
        ) / (2 * eps)
        analytic = (gw if in_weights else gb)[layer][idx]
        scale = max(abs(fd), abs(analytic), 1e-8)
        worst = max(worst, abs(fd - analytic) / scale)
    return worst


class TestGradient:
    def test_zero_weight_net_bias_gradient_matches_closed_form(self):
        # all-zero weights: F = logsig(0) = 0.5 for every input, so the
        # output bias gradient is mean(2 (F - y)) * g'(0) with g'(0) = 1/4
        net = Network(
            layer_sizes=(2, 1),
            activations=("logsig",),
            weights=(np.zeros((1, 2)),),
            biases=(np.zeros(1),),
            x_min=-np.ones(2),
            x_max=np.ones(2),
        )
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(8, 2))

        y_balanced = np.array([True, False] * 4)
        _, gb, _ = gradient(net, X, y_balanced, "mse")
        assert abs(gb[0][0]) < 1e-15

        y_skewed = np.array([False] * 8)
        _, gb, value = gradient(net, X, y_skewed, "mse")
        assert gb[0][0] == pytest.approx(2.0 * 0.5 * 0.25, abs=1e-15)
        assert value == pytest.approx(0.25, abs=1e-15)

    def test_matches_finite_differences_on_sigmoid_nets(self):
        rng = np.random.default_rng(100)
        worst = 0.0
        for seed in range(50):
            net = _random_net([3, 6, 4, 1], ["tansig", "tansig", "logsig"], seed)
            X = rng.uniform(-1.5, 1.5, size=(20, 3))
            y = rng.integers(0, 2, 20).astype(bool)
            worst = max(worst, _fd_check(net, X, y, "mse", 1e-6, 1e-4, rng))
        assert worst < 1e-4

    def test_matches_finite_differences_on_relu_softmax_nets(self):
        rng = np.random.default_rng(200)
        worst = 0.0
        for seed in range(50):
            net = _random_net([3, 6, 4, 2], ["relu", "relu", "softmax"], seed + 1000)
            X = rng.uniform(-1.5, 1.5, size=(20, 3))
            y = rng.integers(0, 2, 20).astype(bool)
            worst = max(worst, _fd_check(net, X, y, "cross-entropy", 1e-6, 1e-3, rng))
        assert worst < 1e-3

    def test_binary_cross_entropy_on_logsig_output(self):
        rng = np.random.default_rng(300)
        net = _random_net([2, 5, 1], ["tansig", "logsig"], 17)
        X = rng.uniform(-1, 1, size=(16, 2))
        y = rng.integers(0, 2, 16).astype(bool)
        assert _fd_check(net, X, y, "cross-entropy", 1e-6, 1e-4, rng) < 1e-4

    def test_gradient_vanishes_at_a_perfect_fit(self):
        # relu output can hit the targets exactly, making the loss 0
        net = Network(
            layer_sizes=(1, 1),
            activations=("relu",),
            weights=(np.zeros((1, 1)),),
            biases=(np.ones(1),),
            x_min=np.array([-1.0]),
            x_max=np.array([1.0]),
        )
        X = np.array([[0.3], [-0.2], [0.9]])
        y = np.array([True, True, True])
        gw, gb, value = gradient(net, X, y, "mse")
        assert value == 0.0
        assert np.all(gw[0] == 0.0) and np.all(gb[0] == 0.0)

    def test_rejects_bad_batches_and_labels(self):
        net = _random_net([2, 3, 1], ["tansig", "logsig"], 3)
        with pytest.raises(ContractError):
            gradient(net, np.empty((0, 2)), np.empty(0, dtype=bool))
        with pytest.raises(ContractError):
            gradient(net, np.zeros((4, 3)), np.zeros(4, dtype=bool))
        with pytest.raises(ContractError):
            gradient(net, np.zeros((4, 2)), np.zeros(3, dtype=bool))
        with pytest.raises(ContractError):
            gradient(net, np.zeros((4, 2)), np.array([0.0, 1.0, 2.0, 0.0]))

    def test_loss_pairing_rules(self):
        softmax_net = _random_net([2, 3, 2], ["tansig", "softmax"], 5)
        X = np.zeros((4, 2))
        y = np.zeros(4, dtype=bool)
        with pytest.raises(ConfigError):
            gradient(softmax_net, X, y, "mse")
        tansig_out = _random_net([2, 3, 1], ["tansig", "tansig"], 6)
        with pytest.raises(ConfigError):
            gradient(tansig_out, X, y, "cross-entropy")


class TestTrainConfig:
    def test_validation(self):
        TrainConfig()
        with pytest.raises(ConfigError):
            TrainConfig(algorithm="adam")
        with pytest.raises(ConfigError):
            TrainConfig(loss="hinge")
        with pytest.raises(ConfigError):
            TrainConfig(max_epochs=0)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(lm_mu_factor=1.0)
        with pytest.raises(ConfigError):
            TrainConfig(lm_mu_init=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainConfig(patience=0)


def _xor_data():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([False, True, True, False])
    return X, y


class TestLevenbergMarquardt:
    def test_xor_reaches_full_training_accuracy(self):
        X, y = _xor_data()
        net = build_network("dnn-s", np.zeros(2), np.ones(2), seed=0)
        trained, log = train(net, X, y, TrainConfig(max_epochs=200))
        assert np.array_equal(classify(trained, X), y)
        assert log.epochs <= 200

    def test_losses_non_increasing_and_final_not_above_initial(self):
        X, y = _xor_data()
        net = build_network("snn", np.zeros(2), np.ones(2), seed=1)
        trained, log = train(net, X, y, TrainConfig(max_epochs=40))
        assert all(b <= a for a, b in zip(log.losses, log.losses[1:]))
        assert log.final_loss <= log.initial_loss
        assert loss_value(trained, X, y) == pytest.approx(log.final_loss)

    def test_bit_identical_determinism(self):
        X, y = _xor_data()
        net = build_network("dnn-s", np.zeros(2), np.ones(2), seed=2)
        a, log_a = train(net, X, y, TrainConfig(max_epochs=50))
        b, log_b = train(net, X, y, TrainConfig(max_epochs=50))
        assert all(np.array_equal(x, w) for x, w in zip(a.weights, b.weights))
        assert all(np.array_equal(x, w) for x, w in zip(a.biases, b.biases))
        assert log_a.losses == log_b.losses

    def test_rejected_steps_raise_mu_and_stop_on_overflow(self):
        # a net already at a strong local optimum: every step is rejected
        # and mu climbs to the overflow stop
        X, y = _xor_data()
        net = build_network("dnn-s", np.zeros(2), np.ones(2), seed=0)
        trained, _ = train(net, X, y, TrainConfig(max_epochs=300))
        retrained, log = train(trained, X, y, TrainConfig(max_epochs=300))
        assert log.stop_reason in (
            "gradient norm below tolerance",
            "damping overflow",
        )
        assert log.final_loss <= log.initial_loss

    def test_softmax_and_non_mse_rejected(self):
        X, y = _xor_data()
        softmax_net = build_network("dnn-r", np.zeros(2), np.ones(2), seed=3)
        with pytest.raises(ConfigError):
            train(softmax_net, X, y, TrainConfig(algorithm="levenberg-marquardt", loss="cross-entropy"))
        sig = build_network("dnn-s", np.zeros(2), np.ones(2), seed=3)
        with pytest.raises(ConfigError):
            train(sig, X, y, TrainConfig(loss="cross-entropy"))

    def test_non_finite_input_aborts_with_initial_parameters(self):
        X, y = _xor_data()
        X = X.copy()
        X[0, 0] = np.nan
        net = build_network("dnn-s", np.zeros(2), np.ones(2), seed=4)
        trained, log = train(net, X, y, TrainConfig(max_epochs=50))
        assert log.stop_reason == "non-finite loss"
        assert all(np.array_equal(a, b) for a, b in zip(trained.weights, net.weights))


class TestGradientDescent:
    def _blobs(self, n=120, seed=0):
        rng = np.random.default_rng(seed)
        half = n // 2
        X = np.vstack(
            [
                rng.normal(loc=(-0.5, -0.5), scale=0.2, size=(half, 2)),
                rng.normal(loc=(0.5, 0.5), scale=0.2, size=(half, 2)),
            ]
        )
        y = np.arange(n) >= half
        return X, y

    def test_descends_and_returns_best_epoch(self):
        X, y = self._blobs()
        net = build_network("snn", -np.ones(2), np.ones(2), seed=5)
        cfg = TrainConfig(algorithm="gradient", max_epochs=30, learning_rate=0.5, seed=9)
        trained, log = train(net, X, y, cfg)
        assert log.final_loss <= log.initial_loss
        assert loss_value(trained, X, y) == pytest.approx(min(log.losses))
        assert (classify(trained, X) == y).mean() > 0.95

    def test_cross_entropy_trains_the_softmax_architecture(self):
        X, y = self._blobs(seed=1)
        net = build_network("dnn-r", -np.ones(2), np.ones(2), seed=6)
        cfg = TrainConfig(
            algorithm="gradient", loss="cross-entropy", max_epochs=40,
            learning_rate=0.2, seed=10,
        )
        trained, log = train(net, X, y, cfg)
        assert log.final_loss <= log.initial_loss
        assert (classify(trained, X) == y).mean() > 0.9

    def test_seed_controls_the_shuffle(self):
        X, y = self._blobs(seed=2)
        net = build_network("snn", -np.ones(2), np.ones(2), seed=7)
        cfg_a = TrainConfig(algorithm="gradient", max_epochs=5, learning_rate=0.3, seed=1)
        a1, log1 = train(net, X, y, cfg_a)
        a2, log2 = train(net, X, y, cfg_a)
        assert log1.losses == log2.losses
        assert all(np.array_equal(p, q) for p, q in zip(a1.weights, a2.weights))
        cfg_b = TrainConfig(algorithm="gradient", max_epochs=5, learning_rate=0.3, seed=2)
        _, log3 = train(net, X, y, cfg_b)
        assert log1.losses != log3.losses

    def test_explosive_rate_aborts_with_last_good_parameters(self):
        # cross-entropy keeps gradients alive through saturation, so an
        # absurd rate overflows the relu layers instead of stalling
        X, y = self._blobs(seed=3)
        net = build_network("dnn-r", -np.ones(2), np.ones(2), seed=8)
        cfg = TrainConfig(
            algorithm="gradient", loss="cross-entropy", max_epochs=50,
            learning_rate=1e200, seed=3,
        )
        with np.errstate(over="ignore", invalid="ignore"):
            trained, log = train(net, X, y, cfg)
        assert log.stop_reason == "non-finite loss"
        assert all(np.array_equal(a, b) for a, b in zip(trained.weights, net.weights))
        final = loss_value(trained, X, y, "cross-entropy")
        assert np.isfinite(final)
        assert final <= log.initial_loss

    def test_patience_stops_stale_training(self):
        X, y = self._blobs(seed=4)
        net = build_network("snn", -np.ones(2), np.ones(2), seed=9)
        cfg = TrainConfig(
            algorithm="gradient", max_epochs=100, learning_rate=1e-300,
            patience=3, seed=4,
        )
        _, log = train(net, X, y, cfg)
        assert log.stop_reason == "patience exhausted"
        assert log.epochs <= 10


class TestAdapt:
    def test_empty_sample_set_is_identity(self):
        net = build_network("dnn-s", -np.ones(2), np.ones(2), seed=11)
        assert adapt(net, np.empty((0, 2)), 0.001) is net

    def test_scores_do_not_decrease_on_adapted_samples(self):
        rng = np.random.default_rng(60)
        net = build_network("snn", -np.ones(2), np.ones(2), seed=12)
        for rate in sorted(DEFAULT_ADAPT_RATES.values()):
            samples = rng.uniform(-1, 1, size=(10, 2))
            current = net
            for row in samples:
                before = forward(current, row)
                current = adapt(current, row[None, :], rate)
                assert forward(current, row) >= before

    def test_freeze_biases_only_moves_weights(self):
        net = build_network("dnn-s", -np.ones(2), np.ones(2), seed=13)
        x = np.array([[0.2, -0.4]])
        frozen = adapt(net, x, 0.01, freeze_biases=True)
        assert all(np.array_equal(a, b) for a, b in zip(frozen.biases, net.biases))
        assert not all(np.array_equal(a, b) for a, b in zip(frozen.weights, net.weights))
        free = adapt(net, x, 0.01, freeze_biases=False)
        assert not all(np.array_equal(a, b) for a, b in zip(free.biases, net.biases))

    def test_adapts_softmax_networks_too(self):
        net = build_network("dnn-r", -np.ones(2), np.ones(2), seed=14)
        x = np.array([[0.3, 0.1]])
        before = forward(net, x[0])
        adapted = adapt(net, x, 0.01)
        assert forward(adapted, x[0]) >= before

    def test_validation(self):
        net = build_network("snn", -np.ones(2), np.ones(2), seed=15)
        with pytest.raises(ConfigError):
            adapt(net, np.zeros((1, 2)), 0.0)
        with pytest.raises(ContractError):
            adapt(net, np.zeros((1, 3)), 0.001)

    def test_default_rates_cover_all_models(self):
        assert set(DEFAULT_ADAPT_RATES) == {"pendulum", "neuron", "quadcopter"}
        assert all(r > 0 for r in DEFAULT_ADAPT_RATES.values())


class TestRepairLoop:
    def test_adaptation_repairs_false_negatives_on_a_trained_net(self):
        # lightly train on a separable problem so the boundary is soft,
        # then push false negatives across it with repeated adapt passes
        rng = np.random.default_rng(70)
        X = rng.uniform(-1, 1, size=(400, 2))
        y = X[:, 0] + X[:, 1] > 0.2
        net = build_network("snn", -np.ones(2), np.ones(2), seed=16)
        trained, _ = train(net, X, y, TrainConfig(max_epochs=6))
        probe = rng.uniform(-1, 1, size=(4000, 2))
        probe_y = probe[:, 0] + probe[:, 1] > 0.2
        pred = classify(trained, probe)
        fn_mask = probe_y & ~pred
        assert np.any(fn_mask)  # a lightly trained net leaves mistakes
        fn_states = probe[fn_mask]
        adapted = trained
        for _ in range(50):
            adapted = adapt(adapted, fn_states, 0.01)
            still = ~classify(adapted, fn_states)
            if not np.any(still):
                break
            fn_states = fn_states[still]
        reclassified = classify(adapted, probe[fn_mask])
        assert reclassified.mean() >= 0.9
        # repairing the misses keeps overall accuracy intact
        assert (classify(adapted, probe) == probe_y).mean() >= 0.98
