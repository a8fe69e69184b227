"""Minimal numpy trainer for feed-forward ReLU regressors.

Adam with an L1 subgradient penalty on the weights (not the biases), MSE
loss, an even train/validation/test split, and early stopping that returns
the best-validation snapshot. Inputs and targets are used raw, without
standardization; the training-log header records that choice. Runs are fully
determined by the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_io import NetworkSpec, predict
from .serialize import write_csv


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    arch: tuple[int, ...] = (140, 100, 60, 20)  # hidden widths; one linear output on top
    lr: float = 5e-3
    l1: float = 5e-5
    batch: int = 100
    max_epochs: int = 300
    early_stop_rounds: int = 100
    seed: int = 0
    val_fraction: float = 1.0 / 3.0
    dtype: str = "float64"  # float32 halves the arithmetic cost of big sweeps

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.l1 < 0:
            raise ValueError(f"l1 must be nonnegative, got {self.l1}")
        if not self.arch or any(w < 1 for w in self.arch):
            raise ValueError(f"hidden widths must be >= 1, got {self.arch}")
        if self.batch < 1 or self.max_epochs < 1 or self.early_stop_rounds < 1:
            raise ValueError("batch, max_epochs and early_stop_rounds must be >= 1")
        if not 0.0 < self.val_fraction < 0.5:
            raise ValueError(f"val_fraction must be in (0, 0.5), got {self.val_fraction}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")
        object.__setattr__(self, "arch", tuple(int(w) for w in self.arch))


@dataclass
class TrainLog:
    """Per-epoch MSEs and the chosen snapshot.

    ``train_mse[e]`` is the mean of that epoch's minibatch MSEs (measured
    before each update); ``val_mse`` is evaluated on the held-out split after
    the epoch. ``test_mse`` belongs to the restored best-validation weights.
    """

    train_mse: list[float]
    val_mse: list[float]
    best_epoch: int
    test_mse: float
    standardized: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.val_mse)


def _init_glorot(widths: tuple[int, ...], rng: np.random.Generator, dtype):
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return weights, biases


def _forward(weights, biases, X):
    acts = [X]
    pres = []
    a = X
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pres.append(z)
        a = np.maximum(z, 0.0) if k < last else z
        acts.append(a)
    return acts, pres


def loss_and_gradients(weights, biases, X, y, l1: float = 0.0):
    """MSE and its gradients for one batch; the L1 subgradient
    ``l1 * sign(W)`` is added to the weight gradients (sign(0) = 0)."""
    X = np.asarray(X, dtype=weights[0].dtype)
    y = np.asarray(y, dtype=weights[0].dtype)
    n = len(y)
    with np.errstate(over="ignore", invalid="ignore"):  # non-finite loss is handled by callers
        acts, pres = _forward(weights, biases, X)
        err = acts[-1][:, 0] - y
        loss = float(np.mean(err**2))
        g = (2.0 / n) * err[:, None]
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(weights) - 1, -1, -1):
            grads_w[k] = acts[k].T @ g
            grads_b[k] = g.sum(axis=0)
            if l1 > 0:
                grads_w[k] = grads_w[k] + l1 * np.sign(weights[k])
            if k > 0:
                g = (g @ weights[k].T) * (pres[k - 1] > 0)
    return loss, grads_w, grads_b


def _batch_mse(weights, biases, X, y) -> float:
    acts, _ = _forward(weights, biases, X)
    return float(np.mean((acts[-1][:, 0] - y) ** 2))


def train_mlp(data, cfg: TrainConfig) -> tuple[NetworkSpec, TrainLog]:
    """Fit an MLP to ``data`` (a DatasetSpec or anything with X and y).

    The samples are shuffled once with the config seed and split into
    validation, test and training parts (val_fraction each for the first two;
    the default third/third/third matches the benchmark protocol). Raises
    TrainingDivergedError with the offending epoch when the loss goes
    non-finite.
    """
    dtype = np.dtype(cfg.dtype)
    X = np.asarray(data.X, dtype=dtype)
    y = np.asarray(data.y, dtype=dtype)
    n = len(y)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_hold = int(round(n * cfg.val_fraction))
    if n_hold < 1 or n - 2 * n_hold < 1:
        raise ValueError(f"{n} samples cannot be split with val_fraction={cfg.val_fraction}")
    val_idx = order[:n_hold]
    test_idx = order[n_hold : 2 * n_hold]
    train_idx = order[2 * n_hold :]
    X_tr, y_tr = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    widths = (X.shape[1],) + cfg.arch + (1,)
    weights, biases = _init_glorot(widths, rng, dtype)
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_val = np.inf
    best_epoch = -1
    best_weights = [w.copy() for w in weights]
    best_biases = [b.copy() for b in biases]
    patience = 0
    train_curve: list[float] = []
    val_curve: list[float] = []

    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(len(y_tr))
        batch_losses = []
        for s in range(0, len(y_tr), cfg.batch):
            idx = perm[s : s + cfg.batch]
            loss, gw, gb = loss_and_gradients(weights, biases, X_tr[idx], y_tr[idx], cfg.l1)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {step} (lr={cfg.lr})"
                )
            batch_losses.append(loss)
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for k in range(len(weights)):
                m_w[k] = beta1 * m_w[k] + (1 - beta1) * gw[k]
                v_w[k] = beta2 * v_w[k] + (1 - beta2) * gw[k] ** 2
                weights[k] -= cfg.lr * (m_w[k] / corr1) / (np.sqrt(v_w[k] / corr2) + eps)
                m_b[k] = beta1 * m_b[k] + (1 - beta1) * gb[k]
                v_b[k] = beta2 * v_b[k] + (1 - beta2) * gb[k] ** 2
                biases[k] -= cfg.lr * (m_b[k] / corr1) / (np.sqrt(v_b[k] / corr2) + eps)
        train_curve.append(float(np.mean(batch_losses)))
        val = _batch_mse(weights, biases, X_val, y_val)
        val_curve.append(val)
        if val < best_val:
            best_val = val
            best_epoch = epoch
            best_weights = [w.copy() for w in weights]
            best_biases = [b.copy() for b in biases]
            patience = 0
        else:
            patience += 1
            if patience >= cfg.early_stop_rounds:
                break

    test_mse = _batch_mse(best_weights, best_biases, X[test_idx], y[test_idx])
    net = NetworkSpec(tuple(best_weights), tuple(best_biases))
    log = TrainLog(
        train_mse=train_curve,
        val_mse=val_curve,
        best_epoch=best_epoch,
        test_mse=test_mse,
    )
    return net, log


def mse(net: NetworkSpec, data) -> float:
    """Mean squared error of the network over a dataset."""
    if net.n_outputs != 1:
        raise ValueError("mse expects a single-output network")
    preds = predict(net, data.X)[:, 0]
    y = np.asarray(data.y, dtype=np.float64)
    if preds.shape != y.shape:
        raise ValueError(f"{len(preds)} predictions vs {len(y)} targets")
    return float(np.mean((preds - y) ** 2))


def write_train_log_csv(log: TrainLog, path) -> None:
    rows = [
        (e, tr, va)
        for e, (tr, va) in enumerate(zip(log.train_mse, log.val_mse))
    ]
    comments = [
        "inputs/targets: raw (not standardized)",
        f"best_epoch={log.best_epoch} test_mse={log.test_mse:.17g}",
    ]
    write_csv(path, rows, header=("epoch", "train_mse", "val_mse"), comments=comments)
