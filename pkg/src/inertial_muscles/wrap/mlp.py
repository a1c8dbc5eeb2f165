"""Small tanh multilayer perceptron in numpy: forward, input Jacobian, Adam training.

Inputs and outputs are z-score normalized with statistics stored alongside
the weights, so callers always work in physical units.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

WEIGHTS_FORMAT = "inertial-muscles/mlp"
WEIGHTS_VERSION = 1


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


@dataclass
class MLPWeights:
    weights: list[np.ndarray]  # W[k] has shape (out, in)
    biases: list[np.ndarray]
    in_mean: np.ndarray
    in_scale: np.ndarray
    out_mean: np.ndarray
    out_scale: np.ndarray
    activation: str = "tanh"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = [np.asarray(W, dtype=float) for W in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape[0] != b.shape[0]:
                raise ValueError(f"layer {k}: bias size {b.shape[0]} != rows {W.shape[0]}")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: input size mismatch")
        for name in ("in_mean", "in_scale", "out_mean", "out_scale"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.in_mean.shape != (self.sizes[0],) or self.out_mean.shape != (self.sizes[-1],):
            raise ValueError("normalization statistics do not match layer sizes")

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @classmethod
    def init(cls, sizes, rng, in_mean=None, in_scale=None, out_mean=None, out_scale=None):
        """Glorot-uniform initialization."""
        Ws, bs = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            lim = np.sqrt(6.0 / (n_in + n_out))
            Ws.append(rng.uniform(-lim, lim, size=(n_out, n_in)))
            bs.append(np.zeros(n_out))
        return cls(
            Ws,
            bs,
            np.zeros(sizes[0]) if in_mean is None else in_mean,
            np.ones(sizes[0]) if in_scale is None else in_scale,
            np.zeros(sizes[-1]) if out_mean is None else out_mean,
            np.ones(sizes[-1]) if out_scale is None else out_scale,
        )

    def copy(self) -> MLPWeights:
        return MLPWeights(
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.in_mean.copy(),
            self.in_scale.copy(),
            self.out_mean.copy(),
            self.out_scale.copy(),
            self.activation,
            dict(self.meta),
        )

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": WEIGHTS_FORMAT,
            "format_version": WEIGHTS_VERSION,
            "activation": self.activation,
            "layer_sizes": self.sizes,
            "layers": [
                {"weight": W.tolist(), "bias": b.tolist()} for W, b in zip(self.weights, self.biases)
            ],
            "input_normalization": {"mean": self.in_mean.tolist(), "scale": self.in_scale.tolist()},
            "output_normalization": {"mean": self.out_mean.tolist(), "scale": self.out_scale.tolist()},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MLPWeights:
        if d.get("format") != WEIGHTS_FORMAT:
            raise ValueError("not an MLP weights file")
        if d.get("format_version") != WEIGHTS_VERSION:
            raise ValueError(f"unsupported weights format_version {d.get('format_version')}")
        w = cls(
            [layer["weight"] for layer in d["layers"]],
            [layer["bias"] for layer in d["layers"]],
            d["input_normalization"]["mean"],
            d["input_normalization"]["scale"],
            d["output_normalization"]["mean"],
            d["output_normalization"]["scale"],
            d.get("activation", "tanh"),
            d.get("meta", {}),
        )
        if w.sizes != list(d["layer_sizes"]):
            raise ValueError("layer_sizes field disagrees with the stored matrices")
        return w

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> MLPWeights:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _check_input(weights: MLPWeights, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != weights.sizes[0]:
        raise ValueError(f"expected input of size {weights.sizes[0]}, got {x.shape[-1]}")
    return x


def _hidden(weights: MLPWeights, z):
    acts = [z]
    h = z
    for W, b in zip(weights.weights[:-1], weights.biases[:-1]):
        h = np.tanh(h @ W.T + b)
        acts.append(h)
    return acts


def mlp_forward(weights: MLPWeights, x):
    """Evaluate on one input (8,) or a batch (m, 8)."""
    x = _check_input(weights, x)
    z = (x - weights.in_mean) / weights.in_scale
    h = _hidden(weights, z)[-1]
    y = h @ weights.weights[-1].T + weights.biases[-1]
    return y * weights.out_scale + weights.out_mean


def mlp_input_jacobian(weights: MLPWeights, x, return_output: bool = False):
    """Exact ``d output / d input``: (3, 8) for one input or (m, 3, 8) for a batch."""
    x = _check_input(weights, x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    z = (X - weights.in_mean) / weights.in_scale
    acts = _hidden(weights, z)
    # reverse sweep: G = dy/dh_k, starting from the output layer
    G = np.broadcast_to(weights.out_scale[:, None] * weights.weights[-1], (len(X),) + weights.weights[-1].shape)
    for k in range(len(weights.weights) - 2, -1, -1):
        h = acts[k + 1]
        G = (G * (1.0 - h * h)[:, None, :]) @ weights.weights[k]
    J = G / weights.in_scale
    if return_output:
        y = acts[-1] @ weights.weights[-1].T + weights.biases[-1]
        y = y * weights.out_scale + weights.out_mean
        return (J[0], y[0]) if single else (J, y)
    return J[0] if single else J


@dataclass
class TrainConfig:
    hidden: tuple = (64, 64, 64, 64)
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 50_000
    batch_size: int = 256
    log_every: int = 500
    final_lr_fraction: float = 1.0  # < 1 enables cosine decay to learning_rate * fraction


@dataclass
class TrainResult:
    weights: MLPWeights
    loss_history: list  # (step, loss)
    final_loss: float
    seconds: float


def normalization_stats(A):
    mean = A.mean(axis=0)
    scale = A.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    return mean, scale


def mlp_train(inputs, targets, config: TrainConfig | None = None, seed: int = 0,
              init: MLPWeights | None = None) -> TrainResult:
    """Adam on the mean squared l2 error of normalized outputs."""
    config = config or TrainConfig()
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if len(X) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    if init is None:
        in_mean, in_scale = normalization_stats(X)
        out_mean, out_scale = normalization_stats(Y)
        sizes = [X.shape[1], *config.hidden, Y.shape[1]]
        net = MLPWeights.init(sizes, rng, in_mean, in_scale, out_mean, out_scale)
    else:
        net = init.copy()
    Z = (X - net.in_mean) / net.in_scale
    T = (Y - net.out_mean) / net.out_scale

    params = [p for pair in zip(net.weights, net.biases) for p in pair]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = config.beta1, config.beta2
    history = []
    nL = len(net.weights)
    n = len(Z)
    bs = min(config.batch_size, n)
    t0 = time.perf_counter()
    running = None
    perm = rng.permutation(n)
    cursor = 0
    for step in range(1, config.steps + 1):
        if cursor + bs > n:
            perm = rng.permutation(n)
            cursor = 0
        idx = perm[cursor : cursor + bs]
        cursor += bs
        xb, tb = Z[idx], T[idx]

        acts = [xb]
        h = xb
        for k in range(nL - 1):
            h = np.tanh(h @ net.weights[k].T + net.biases[k])
            acts.append(h)
        out = h @ net.weights[-1].T + net.biases[-1]
        err = out - tb
        loss = float(np.mean(np.sum(err * err, axis=1)))
        if not np.isfinite(loss):
            raise TrainingError(f"loss became non-finite at step {step}")
        running = loss if running is None else 0.98 * running + 0.02 * loss

        grads = [None] * (2 * nL)
        delta = 2.0 * err / bs
        for k in range(nL - 1, -1, -1):
            grads[2 * k] = delta.T @ acts[k]
            grads[2 * k + 1] = delta.sum(axis=0)
            if k:
                delta = (delta @ net.weights[k]) * (1.0 - acts[k] ** 2)

        lr = config.learning_rate
        if config.final_lr_fraction != 1.0:
            c = 0.5 * (1.0 + np.cos(np.pi * step / config.steps))
            lr *= config.final_lr_fraction + (1.0 - config.final_lr_fraction) * c
        lr_t = lr * np.sqrt(1.0 - b2**step) / (1.0 - b1**step)
        for p, g, mm, vv in zip(params, grads, m, v):
            mm *= b1
            mm += (1.0 - b1) * g
            vv *= b2
            vv += (1.0 - b2) * g * g
            p -= lr_t * mm / (np.sqrt(vv) + config.eps)

        if step % config.log_every == 0 or step == config.steps:
            history.append((step, running))

    full = mlp_forward(net, X)
    final = float(np.mean(np.sum(((full - Y) / net.out_scale) ** 2, axis=1)))
    if not np.isfinite(final):
        raise TrainingError("final loss is non-finite")
    return TrainResult(net, history, final, time.perf_counter() - t0)
