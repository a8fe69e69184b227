import numpy as np
import pytest

from persid import (
    DatasetSpec,
    NetworkSpec,
    TrainConfig,
    TrainingDivergedError,
    loss_and_gradients,
    mse,
    predict,
    train_mlp,
)
from persid.trainer import write_train_log_csv


def fd_gradients(weights, biases, X, y, l1, step=1e-5):
    """Central finite differences of MSE + l1 * sum|W|."""

    def loss():
        a = X
        for k, (w, b) in enumerate(zip(weights, biases)):
            z = a @ w + b
            a = np.maximum(z, 0.0) if k < len(weights) - 1 else z
        base = float(np.mean((a[:, 0] - y) ** 2))
        return base + l1 * sum(np.abs(w).sum() for w in weights)

    grads_w = [np.zeros_like(w) for w in weights]
    grads_b = [np.zeros_like(b) for b in biases]
    for k, w in enumerate(weights):
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + step
            hi = loss()
            w[idx] = orig - step
            lo = loss()
            w[idx] = orig
            grads_w[k][idx] = (hi - lo) / (2 * step)
    for k, b in enumerate(biases):
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + step
            hi = loss()
            b[idx] = orig - step
            lo = loss()
            b[idx] = orig
            grads_b[k][idx] = (hi - lo) / (2 * step)
    return grads_w, grads_b


def kink_free(weights, biases, X, margin=1e-6):
    """True when no pre-activation sits within `margin` of the ReLU kink."""
    a = X
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        if k < len(weights) - 1 and np.any(np.abs(z) < margin):
            return False
        a = np.maximum(z, 0.0) if k < len(weights) - 1 else z
    return True


def linear_dataset(rng, n=1500, d=3):
    X = rng.uniform(-1, 1, size=(n, d))
    return DatasetSpec(X=X, y=3.0 * X[:, 0], kinds=("dense",) * d)


class TestGradients:
    @pytest.mark.parametrize("l1", [0.0, 1e-3])
    def test_matches_central_differences(self, rng, l1):
        checked = 0
        while checked < 10:
            widths = (3, 5, 4, 1)
            weights = [rng.standard_normal((a, b)) for a, b in zip(widths[:-1], widths[1:])]
            biases = [rng.standard_normal(b) * 0.1 for b in widths[1:]]
            X = rng.uniform(-1, 1, size=(8, 3))
            y = rng.standard_normal(8)
            if not kink_free(weights, biases, X):
                continue
            if l1 > 0 and any(np.abs(w).min() < 1e-4 for w in weights):
                continue  # |w| is non-differentiable at 0
            _, gw, gb = loss_and_gradients(weights, biases, X, y, l1)
            fw, fb = fd_gradients(weights, biases, X, y, l1)
            for a, b in zip(gw + gb, fw + fb):
                denom = np.maximum(np.abs(b), 1e-8)
                assert np.max(np.abs(a - b) / denom) <= 1e-4
            checked += 1

    def test_sign_zero_convention(self, rng):
        weights = [np.array([[0.0], [1.0]])]
        biases = [np.zeros(1)]
        X = rng.uniform(-1, 1, size=(4, 2))
        y = np.zeros(4)
        _, with_l1, _ = loss_and_gradients(weights, biases, X, y, l1=1.0)
        _, without, _ = loss_and_gradients(weights, biases, X, y, l1=0.0)
        assert with_l1[0][0, 0] == without[0][0, 0]  # sign(0) adds nothing
        assert with_l1[0][1, 0] == without[0][1, 0] + 1.0


class TestTraining:
    def test_linear_target_fits(self, rng):
        data = linear_dataset(rng)
        cfg = TrainConfig(arch=(8,), lr=1e-2, l1=0.0, batch=50, max_epochs=200,
                          early_stop_rounds=200, seed=3)
        net, log = train_mlp(data, cfg)
        assert log.test_mse < 1e-3

    def test_absurd_l1_collapses_weights(self, rng):
        data = linear_dataset(rng)
        free = TrainConfig(arch=(8,), lr=1e-2, l1=0.0, batch=50, max_epochs=120,
                           early_stop_rounds=120, seed=3)
        crushed = TrainConfig(arch=(8,), lr=1e-2, l1=10.0, batch=50, max_epochs=120,
                              early_stop_rounds=120, seed=3)
        net_free, _ = train_mlp(data, free)
        net, log = train_mlp(data, crushed)
        var = float(np.var(data.y))
        assert abs(log.test_mse - var) / var < 0.35  # predicts ~ the mean
        total = sum(np.abs(w).sum() for w in net.layers)
        total_free = sum(np.abs(w).sum() for w in net_free.layers)
        assert total < 0.8 * total_free

    def test_seeded_determinism(self, rng):
        data = linear_dataset(rng, n=240)
        cfg = TrainConfig(arch=(6, 4), max_epochs=12, early_stop_rounds=12, seed=11)
        net_a, log_a = train_mlp(data, cfg)
        net_b, log_b = train_mlp(data, cfg)
        for a, b in zip(net_a.layers, net_b.layers):
            assert np.array_equal(a, b)
        assert log_a.val_mse == log_b.val_mse

    def test_non_finite_loss_aborts_with_diagnostic(self, rng):
        # targets whose squared error overflows float64 on the first batch
        X = rng.uniform(-1, 1, size=(240, 3))
        data = DatasetSpec(X=X, y=np.full(240, 1e160), kinds=("dense",) * 3)
        cfg = TrainConfig(arch=(6,), max_epochs=50, early_stop_rounds=50, seed=0)
        with pytest.raises(TrainingDivergedError, match="epoch"):
            train_mlp(data, cfg)

    def test_best_value_not_worse_than_stop(self, rng):
        data = linear_dataset(rng, n=300)
        cfg = TrainConfig(arch=(6,), max_epochs=60, early_stop_rounds=5, seed=2)
        net, log = train_mlp(data, cfg)
        assert min(log.val_mse) == log.val_mse[log.best_epoch]
        assert log.val_mse[log.best_epoch] <= log.val_mse[-1]

    def test_l1_monotonicity_statistical(self, rng):
        data = linear_dataset(rng, n=400)
        sums = []
        for l1 in (0.0, 1e-2, 1.0):
            totals = []
            for seed in range(5):
                cfg = TrainConfig(arch=(6,), l1=l1, max_epochs=60,
                                  early_stop_rounds=60, seed=seed)
                net, _ = train_mlp(data, cfg)
                totals.append(sum(np.abs(w).sum() for w in net.layers))
            sums.append(np.mean(totals))
        assert sums[0] >= sums[1] >= sums[2]

    def test_float32_mode(self, rng):
        data = linear_dataset(rng)
        cfg = TrainConfig(arch=(8,), lr=1e-2, batch=50, max_epochs=120,
                          early_stop_rounds=120, seed=3, dtype="float32")
        net_a, log_a = train_mlp(data, cfg)
        net_b, log_b = train_mlp(data, cfg)
        assert log_a.test_mse < 1e-3
        assert log_a.val_mse == log_b.val_mse  # still fully deterministic
        for a, b in zip(net_a.layers, net_b.layers):
            assert np.array_equal(a, b)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="lr"):
            TrainConfig(lr=0.0)
        with pytest.raises(ValueError, match="l1"):
            TrainConfig(l1=-1.0)
        with pytest.raises(ValueError, match="widths"):
            TrainConfig(arch=(0,))
        with pytest.raises(ValueError, match="dtype"):
            TrainConfig(dtype="float16")


class TestMse:
    def test_perfect_predictor(self, rng):
        # y = x0 exactly, via an identity-ish ReLU pair
        w1 = np.array([[1.0, -1.0], [0.0, 0.0]])
        w2 = np.array([[1.0], [-1.0]])
        net = NetworkSpec((w1, w2))
        X = rng.uniform(-1, 1, size=(50, 2))
        data = DatasetSpec(X=X, y=X[:, 0], kinds=("dense", "dense"))
        assert mse(net, data) == 0.0

    def test_zero_net_on_centered_targets(self, rng):
        net = NetworkSpec((np.zeros((3, 4)), np.zeros((4, 1))))
        X = rng.uniform(-1, 1, size=(400, 3))
        y = rng.standard_normal(400)
        y -= y.mean()
        data = DatasetSpec(X=X, y=y, kinds=("dense",) * 3)
        assert mse(net, data) == pytest.approx(np.var(y))

    def test_matches_two_line_oracle(self, rng):
        from conftest import random_net

        net = random_net(rng, (4, 6, 1), biases=True)
        X = rng.uniform(-1, 1, size=(30, 4))
        y = rng.standard_normal(30)
        data = DatasetSpec(X=X, y=y, kinds=("dense",) * 4)
        preds = predict(net, X)[:, 0]
        assert mse(net, data) == pytest.approx(float(np.mean((preds - y) ** 2)), abs=1e-15)


def test_log_csv_header_notes_raw_targets(rng, tmp_path):
    data = linear_dataset(rng, n=240)
    cfg = TrainConfig(arch=(4,), max_epochs=5, early_stop_rounds=5, seed=1)
    _, log = train_mlp(data, cfg)
    path = tmp_path / "log.csv"
    write_train_log_csv(log, path)
    text = path.read_text().splitlines()
    assert text[0].startswith("# inputs/targets: raw")
    assert "epoch,train_mse,val_mse" in text[2]
    assert len(text) == 3 + log.epochs_run
