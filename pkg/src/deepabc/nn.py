"""Dense tanh network regressing parameters on data, trained by minibatch SGD.

Weights follow the ``W[l] @ h + b[l]`` convention, so ``W[l]`` has shape
(n_out, n_in). The L2 penalty covers ``W[1:]`` only: the input-layer matrix
is not penalised.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, RngStream

CHECKPOINT_FORMAT = "deepabc-checkpoint"
CHECKPOINT_SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed or inconsistent checkpoint files."""


class TrainingDiverged(ArithmeticError):
    def __init__(self, epoch: int, learning_rate: float, loss: float):
        super().__init__(
            f"training diverged at epoch {epoch} (learning rate {learning_rate:g}, loss {loss})"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


@dataclass
class MLP:
    """Feed-forward network: tanh on every hidden layer, identity output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) < 2:
            raise ValueError("network needs at least one hidden layer")
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias vector per weight matrix")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {l}: bias shape {b.shape} does not match W {w.shape}")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l}: input size {w.shape[1]} does not match "
                                 f"previous output {self.weights[l - 1].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l} has non-finite parameters")

    @classmethod
    def initialize(cls, layer_sizes, seed: int = 0) -> "MLP":
        """Uniform fan-in/fan-out initialisation; biases start at zero."""
        layer_sizes = [int(n) for n in layer_sizes]
        if len(layer_sizes) < 3:
            raise ValueError("layer_sizes must be [input, hidden..., output] with >= 1 hidden")
        gen = RngStream(seed, 0).generator()
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            a = np.sqrt(6.0 / (n_in + n_out))
            weights.append(gen.uniform(-a, a, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, layer_sizes) -> "MLP":
        pairs = list(zip(layer_sizes[:-1], layer_sizes[1:]))
        return cls([np.zeros((o, i)) for i, o in pairs], [np.zeros(o) for _, o in pairs])

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _activations(self, x: np.ndarray) -> list[np.ndarray]:
        hs = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            hs.append(np.tanh(hs[-1] @ w.T + b))
        return hs

    def forward(self, x) -> np.ndarray:
        """Predict parameters for one input vector or a batch of row vectors."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        if xb.ndim != 2 or xb.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected inputs of length {self.layer_sizes[0]}, got shape {x.shape}")
        out = self._activations(xb)[-1] @ self.weights[-1].T + self.biases[-1]
        return out[0] if single else out

    __call__ = forward

    def predict(self, x, batch_size: int = 8192) -> np.ndarray:
        x = np.asarray(x)
        return np.concatenate([
            self.forward(x[i:i + batch_size].astype(np.float64, copy=False))
            for i in range(0, len(x), batch_size)
        ]) if len(x) else np.empty((0, self.layer_sizes[-1]))

    def penalty(self) -> float:
        return float(sum(np.sum(w * w) for w in self.weights[1:]))


def loss(model: MLP, x, theta, l2_lambda: float = 0.0) -> float:
    """Mean squared error over the batch plus ``l2_lambda * sum ||W[l]||_F^2`` for l >= 1."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).reshape(len(x), -1)
    if len(x) == 0:
        raise ValueError("empty batch")
    resid = model.forward(x) - theta
    return float(np.mean(np.sum(resid * resid, axis=1))) + l2_lambda * model.penalty()


def backprop_gradient(model: MLP, x, theta, l2_lambda: float = 0.0):
    """Exact gradient of :func:`loss`; returns ``(loss, grad_weights, grad_biases)``."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).reshape(len(x), -1)
    if len(x) == 0:
        raise ValueError("empty batch")
    hs = model._activations(x)
    out = hs[-1] @ model.weights[-1].T + model.biases[-1]
    resid = out - theta
    value = float(np.mean(np.sum(resid * resid, axis=1))) + l2_lambda * model.penalty()
    delta = (2.0 / len(x)) * resid
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        gw[l] = delta.T @ hs[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            gw[l] += 2.0 * l2_lambda * model.weights[l]
            delta = (delta @ model.weights[l]) * (1.0 - hs[l] * hs[l])
    return value, gw, gb


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    minibatch_size: int = 64
    learning_rate: float = 0.01
    lr_schedule: str = "step"  # "constant" or "step"
    decay_every: int = 50
    decay_factor: float = 0.5
    l2_lambda: float = 0.0
    # 0 disables early stopping; the best-validation weights are still returned
    early_stopping_patience: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.minibatch_size < 1:
            raise ValueError("epochs and minibatch_size must be >= 1")
        if self.learning_rate < 0 or self.l2_lambda < 0:
            raise ValueError("learning_rate and l2_lambda must be nonnegative")
        if self.early_stopping_patience < 0:
            raise ValueError("early_stopping_patience must be >= 0")
        if self.lr_schedule not in ("constant", "step"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    def lr_at(self, epoch: int) -> float:
        if self.lr_schedule == "constant":
            return self.learning_rate
        return self.learning_rate * self.decay_factor ** (epoch // self.decay_every)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = 0
    wall_time_seconds: float = 0.0
    train_rmse: np.ndarray | None = None
    test_rmse: np.ndarray | None = None

    def write_csv(self, path, comments=()) -> None:
        """Per-epoch losses; ``comments`` become leading ``# key=value`` lines."""
        with open(path, "w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for i, (a, b) in enumerate(zip(self.train_loss, self.val_loss)):
                w.writerow([i, repr(a), repr(b)])


def _mse(model: MLP, x, theta) -> float:
    resid = model.predict(x) - theta
    return float(np.mean(np.sum(resid * resid, axis=1)))


def component_rmse(model, x, theta) -> np.ndarray:
    resid = model.predict(x) - theta
    return np.sqrt(np.mean(resid * resid, axis=0))


def train(init: MLP, data: Dataset, cfg: TrainConfig, log=None) -> tuple[MLP, TrainReport]:
    """Shuffled minibatch SGD with validation tracking and early stopping.

    The returned model holds the parameters with the lowest validation MSE.
    """
    start = time.perf_counter()
    tr = data.subset("train")
    va = data.subset("validation")
    x, theta = tr.inputs(), tr.theta
    xv, thetav = va.inputs(), va.theta
    if x.shape[1] != init.layer_sizes[0] or theta.shape[1] != init.layer_sizes[-1]:
        raise ValueError(f"network {init.layer_sizes} does not fit data (p={x.shape[1]}, q={theta.shape[1]})")
    model = init.copy()
    gen = RngStream(cfg.seed, 1).generator()
    report = TrainReport()
    best = model.copy()
    best_val = np.inf
    since_best = 0
    n = len(x)
    bs = cfg.minibatch_size
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = gen.permutation(n)
        total = 0.0
        for s in range(0, n, bs):
            idx = order[s:s + bs]
            value, gw, gb = backprop_gradient(model, x[idx], theta[idx], cfg.l2_lambda)
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, lr, value)
            total += value * len(idx)
            for l in range(len(gw)):
                model.weights[l] -= lr * gw[l]
                model.biases[l] -= lr * gb[l]
        train_loss = total / n
        val_loss = _mse(model, xv, thetav)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingDiverged(epoch, lr, val_loss)
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.stopped_epoch = epoch
        if log is not None:
            log(f"epoch {epoch:4d}  lr {lr:.4g}  train {train_loss:.6f}  val {val_loss:.6f}")
        if val_loss < best_val:
            best_val, best, since_best = val_loss, model.copy(), 0
            report.best_epoch = epoch
        else:
            since_best += 1
            if cfg.early_stopping_patience and since_best >= cfg.early_stopping_patience:
                break
    report.wall_time_seconds = time.perf_counter() - start
    report.train_rmse = component_rmse(best, x, theta)
    if data.has_split("test"):
        te = data.subset("test")
        report.test_rmse = component_rmse(best, te.inputs(), te.theta)
    return best, report


# --------------------------------------------------------------------------
# checkpoints


def write_container(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    """JSON header line followed by the raw little-endian array payloads."""
    specs, blobs = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype=np.dtype(arr.dtype).newbyteorder("<"))
        specs.append({"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str})
        blobs.append(arr.tobytes())
    payload = b"".join(blobs)
    header = dict(header, arrays=specs, payload_sha256=hashlib.sha256(payload).hexdigest())
    header.setdefault("format", CHECKPOINT_FORMAT)
    header.setdefault("schema_version", CHECKPOINT_SCHEMA_VERSION)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    try:
        header = json.loads(blob[:nl])
    except (json.JSONDecodeError, ValueError):
        raise CheckpointError(f"{path}: unreadable header") from None
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if header.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointError(f"{path}: unsupported schema version {header.get('schema_version')}")
    payload = blob[nl + 1:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CheckpointError(f"{path}: payload checksum mismatch")
    arrays, offset = {}, 0
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = count * dt.itemsize
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: payload too short for array {spec['name']}")
        arrays[spec["name"]] = np.frombuffer(payload, dt, count, offset).reshape(spec["shape"]).copy()
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{path}: trailing payload bytes")
    return header, arrays


def save_model(model: MLP, path, **meta) -> None:
    """Write a checkpoint; ``meta`` (l2_lambda, seed, training_set_hash, ...) goes in the header."""
    arrays = {}
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{l}"] = w
        arrays[f"b{l}"] = b
    header = {
        "model_tag": "mlp",
        "layer_sizes": model.layer_sizes,
        "activation": "tanh",
        "input_transform": "none",
        **meta,
    }
    write_container(path, header, arrays)


def load_model(path) -> MLP:
    header, arrays = read_container(path)
    if header.get("model_tag") != "mlp":
        raise CheckpointError(f"{path}: model tag {header.get('model_tag')!r} is not an MLP")
    if header.get("activation") != "tanh":
        raise CheckpointError(f"{path}: unsupported activation {header.get('activation')!r}")
    sizes = header.get("layer_sizes")
    if not isinstance(sizes, list) or len(sizes) < 3:
        raise CheckpointError(f"{path}: bad layer_sizes header {sizes!r}")
    n_layers = len(sizes) - 1
    weights, biases = [], []
    for l in range(n_layers):
        try:
            w, b = arrays[f"W{l}"], arrays[f"b{l}"]
        except KeyError as exc:
            raise CheckpointError(f"{path}: missing array {exc}") from None
        if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
            raise CheckpointError(
                f"{path}: layer {l} arrays {w.shape}/{b.shape} disagree with "
                f"layer_sizes header {sizes}"
            )
        weights.append(w)
        biases.append(b)
    if len(arrays) != 2 * n_layers:
        raise CheckpointError(f"{path}: array count disagrees with layer_sizes header {sizes}")
    return MLP(weights, biases)


def checkpoint_header(path) -> dict:
    return read_container(path)[0]
