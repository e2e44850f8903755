"""Fully-connected ReLU regressor with hand-written backpropagation.

The network maps the 7 standardized features through ReLU hidden layers
to a single standardized output, which is de-standardized to degrees C.
Training uses Adam on mini-batch MSE with decoupled weight decay by
default (a switch restores coupled L2), dropout with inverted scaling at
train time only, and a fixed epoch budget.

Besides prediction, the model exposes the exact reverse-mode derivative
of its output with respect to the 7 inputs, which is what makes the
gradient-based optimization path possible. The ReLU subgradient at a
pre-activation of exactly 0 is taken as 1 (unit active).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DatasetError, TrainingDivergedError
from .features import FeatureVector

SERIAL_FORMAT = "alloyopt-mlp"
SERIAL_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer widths from the 7 inputs to the single output."""

    hidden: tuple[int, ...]
    dropout_rate: float = 0.0
    n_inputs: int = 7

    def __post_init__(self):
        if any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.n_inputs, *self.hidden, 1)


@dataclass(frozen=True)
class MlpTrainConfig:
    epochs: int = 1000
    batch_size: int = 128
    learning_rate: float = 0.01
    weight_decay: float = 0.01
    seed: int = 0
    decoupled_weight_decay: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be > 0 and weight_decay >= 0")


@dataclass(frozen=True)
class MlpModel:
    arch: MlpArchitecture
    weights: tuple[np.ndarray, ...]  # weights[k]: (widths[k], widths[k+1])
    biases: tuple[np.ndarray, ...]
    x_mean: np.ndarray = field(default_factory=lambda: np.zeros(7))
    x_std: np.ndarray = field(default_factory=lambda: np.ones(7))
    t_mean: float = 0.0
    t_std: float = 1.0

    def __post_init__(self):
        widths = self.arch.widths
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (widths[k], widths[k + 1]) or b.shape != (widths[k + 1],):
                raise ValueError(f"layer {k} shapes inconsistent with architecture")
        if np.any(self.x_std <= 0.0) or self.t_std <= 0.0:
            raise ValueError("standardization stds must be positive")

    def forward_batch(self, Y: np.ndarray) -> np.ndarray:
        a = (np.asarray(Y, dtype=float) - self.x_mean) / self.x_std
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ W + b
            if k < last:
                a = np.maximum(a, 0.0)
        return a[:, 0] * self.t_std + self.t_mean

    def predict(self, y) -> float:
        return float(self.forward_batch(_as_row(y))[0])

    def predict_batch(self, Y: np.ndarray) -> np.ndarray:
        return self.forward_batch(Y)

    def input_gradient(self, y) -> np.ndarray:
        """Exact d(output)/d(input), including the standardization chain."""
        a = (_as_row(y)[0] - self.x_mean) / self.x_std
        pre = []
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            pre.append(z)
            a = np.maximum(z, 0.0) if k < last else z
        g = np.array([self.t_std])
        for k in range(last, -1, -1):
            g = self.weights[k] @ g
            if k > 0:
                g = g * (pre[k - 1] >= 0.0)
        return g / self.x_std

    def activation_pattern(self, y) -> tuple[np.ndarray, ...]:
        """Boolean active/inactive mask of every hidden unit at input y."""
        a = (_as_row(y)[0] - self.x_mean) / self.x_std
        masks = []
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            if k < last:
                masks.append(z >= 0.0)
                a = np.maximum(z, 0.0)
        return tuple(masks)


def _as_row(y) -> np.ndarray:
    a = y.as_array() if isinstance(y, FeatureVector) else np.asarray(y, dtype=float)
    return a.reshape(1, -1)


def init_mlp(arch: MlpArchitecture, seed: int) -> MlpModel:
    """He-style fan-in scaled normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    widths = arch.widths
    weights, biases = [], []
    for k in range(len(widths) - 1):
        fan_in = widths[k]
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (widths[k], widths[k + 1])))
        biases.append(np.zeros(widths[k + 1]))
    return MlpModel(arch=arch, weights=tuple(weights), biases=tuple(biases))


def forward(m: MlpModel, y) -> float:
    return m.predict(y)


def input_gradient(m: MlpModel, y) -> np.ndarray:
    return m.input_gradient(y)


def smooth_at(m: MlpModel, y, h: float) -> bool:
    """True when no ReLU unit flips within the +-h finite-difference probe.

    Used by gradient checks to exclude kink points, where the derivative
    of a piecewise-linear network is one-sided.
    """
    y0 = _as_row(y)[0]
    base = m.activation_pattern(y0)
    for i in range(y0.size):
        for sign in (-1.0, 1.0):
            probe = y0.copy()
            probe[i] += sign * h
            for ref, got in zip(base, m.activation_pattern(probe)):
                if not np.array_equal(ref, got):
                    return False
    return True


def train_adam(m: MlpModel, train: Dataset | tuple, cfg: MlpTrainConfig):
    """Train with Adam on standardized MSE; returns (model, loss_history).

    ``train`` is a Dataset or a raw ``(features, targets)`` pair. Input and
    target standardization constants are (re)fitted on this data. Dropout
    is applied after each hidden layer at train time with inverted
    scaling. A non-finite loss aborts with the epoch index.
    """
    if isinstance(train, Dataset):
        X_raw, t_raw = train.feature_matrix(), train.temperatures()
    else:
        X_raw, t_raw = (np.asarray(a, dtype=float) for a in train)
    if X_raw.shape[0] == 0:
        raise DatasetError("cannot train on an empty dataset")

    x_mean = X_raw.mean(axis=0)
    x_std = X_raw.std(axis=0)
    x_std[x_std == 0.0] = 1.0
    t_mean = float(t_raw.mean())
    t_std = float(t_raw.std())
    if t_std == 0.0:
        t_std = 1.0
    model = replace(m, x_mean=x_mean, x_std=x_std, t_mean=t_mean, t_std=t_std)
    if cfg.epochs == 0:
        return model, []

    X = (X_raw - x_mean) / x_std
    t = (t_raw - t_mean) / t_std
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)

    Ws = [W.copy() for W in model.weights]
    bs = [b.copy() for b in model.biases]
    mom = [np.zeros_like(p) for p in Ws + bs]
    vel = [np.zeros_like(p) for p in Ws + bs]
    last = len(Ws) - 1
    drop = model.arch.dropout_rate
    step = 0
    history = []

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            xb, tb = X[batch], t[batch]

            acts = [xb]
            pre = []
            masks = []
            a = xb
            for k in range(last + 1):
                z = a @ Ws[k] + bs[k]
                pre.append(z)
                if k < last:
                    a = np.maximum(z, 0.0)
                    if drop > 0.0:
                        keep = rng.random(a.shape) >= drop
                        a = a * keep / (1.0 - drop)
                        masks.append(keep)
                    acts.append(a)
            out = pre[last][:, 0]

            resid = out - tb
            loss = float(np.mean(resid**2))
            epoch_loss += loss * batch.size
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)

            gW = [None] * (last + 1)
            gb = [None] * (last + 1)
            delta = (2.0 * resid / batch.size)[:, None]
            for k in range(last, -1, -1):
                gW[k] = acts[k].T @ delta
                gb[k] = delta.sum(axis=0)
                if k > 0:
                    delta = delta @ Ws[k].T
                    if drop > 0.0:
                        delta = delta * masks[k - 1] / (1.0 - drop)
                    delta = delta * (pre[k - 1] >= 0.0)

            step += 1
            params = Ws + bs
            grads = gW + gb
            bc1 = 1.0 - ADAM_BETA1**step
            bc2 = 1.0 - ADAM_BETA2**step
            for p, g, mo, ve in zip(params, grads, mom, vel):
                if not cfg.decoupled_weight_decay and cfg.weight_decay > 0.0:
                    g = g + cfg.weight_decay * p
                mo *= ADAM_BETA1
                mo += (1.0 - ADAM_BETA1) * g
                ve *= ADAM_BETA2
                ve += (1.0 - ADAM_BETA2) * g * g
                p -= cfg.learning_rate * (mo / bc1) / (np.sqrt(ve / bc2) + ADAM_EPS)
                if cfg.decoupled_weight_decay and cfg.weight_decay > 0.0:
                    p -= cfg.learning_rate * cfg.weight_decay * p
        history.append(epoch_loss / n)

    trained = MlpModel(
        arch=model.arch,
        weights=tuple(Ws),
        biases=tuple(bs),
        x_mean=x_mean,
        x_std=x_std,
        t_mean=t_mean,
        t_std=t_std,
    )
    return trained, history


def save_mlp(m: MlpModel, path) -> None:
    """Versioned npz archive including standardization constants."""
    meta = {
        "format": SERIAL_FORMAT,
        "version": SERIAL_VERSION,
        "hidden": list(m.arch.hidden),
        "dropout_rate": m.arch.dropout_rate,
        "n_inputs": m.arch.n_inputs,
        "t_mean": m.t_mean,
        "t_std": m.t_std,
    }
    arrays = {"x_mean": m.x_mean, "x_std": m.x_std}
    for k, (W, b) in enumerate(zip(m.weights, m.biases)):
        arrays[f"W{k}"] = W
        arrays[f"b{k}"] = b
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_mlp(path) -> MlpModel:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format") != SERIAL_FORMAT:
            raise ValueError(f"not an MLP model file: {path}")
        if meta.get("version") != SERIAL_VERSION:
            raise ValueError(f"unsupported model version {meta.get('version')}")
        arch = MlpArchitecture(
            hidden=tuple(meta["hidden"]),
            dropout_rate=meta["dropout_rate"],
            n_inputs=meta["n_inputs"],
        )
        n_layers = len(arch.widths) - 1
        weights = tuple(data[f"W{k}"] for k in range(n_layers))
        biases = tuple(data[f"b{k}"] for k in range(n_layers))
        return MlpModel(
            arch=arch,
            weights=weights,
            biases=biases,
            x_mean=data["x_mean"],
            x_std=data["x_std"],
            t_mean=float(meta["t_mean"]),
            t_std=float(meta["t_std"]),
        )


def export_loss_history(history, path) -> None:
    lines = ["epoch,mse"] + [f"{i},{repr(float(v))}" for i, v in enumerate(history)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
