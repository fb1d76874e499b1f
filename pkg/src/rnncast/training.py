"""BPTT gradients, RMSProp and the training loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import ModelParameters, forward_batch, init_params

MIN_DATASET = 10
GRADCHECK_MAX_PARAMS = 10_000


class NumericError(ArithmeticError):
    """A loss or gradient went non-finite."""


class DatasetTooSmallError(ValueError):
    pass


def mse(pred, actual):
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size == 0:
        raise ValueError("mse needs two non-empty sequences of equal length")
    return float(np.mean((pred - actual) ** 2))


@dataclass
class OptimizerState:
    v: list
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-7

    @classmethod
    def zeros_like(cls, arrays, **kw):
        return cls([np.zeros_like(np.asarray(a, dtype=np.float64)) for a in arrays], **kw)


def rmsprop_step(params, grads, state):
    """One RMSProp update over parallel lists of arrays.

    ``v <- rho * v + (1 - rho) * g**2`` then ``p <- p - lr * g / sqrt(v + eps)``.
    Returns the new parameter list; ``state.v`` is updated in place.
    """
    if len(params) != len(grads) or len(params) != len(state.v):
        raise ValueError("parameter, gradient and accumulator lists differ in length")
    out = []
    for k, (p, g) in enumerate(zip(params, grads)):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or p.shape != state.v[k].shape:
            raise ValueError(f"shape mismatch in block {k}: {p.shape} vs {g.shape}")
        v = state.rho * state.v[k] + (1.0 - state.rho) * g * g
        state.v[k] = v
        out.append(p - state.learning_rate * g / np.sqrt(v + state.epsilon))
    return out


def _backward_layer(cell, xs, W, U, hs, cache, dhs):
    if cell == "LSTM":
        return kernels.lstm_backward(xs, W, U, hs, *cache, dhs)
    if cell == "GRU":
        return kernels.gru_backward(xs, W, U, hs, *cache, dhs)
    return kernels.rnn_backward(xs, W, U, hs, dhs)


def bptt_gradients(config, params, windows, targets, where=""):
    """Loss and exact gradients of the batch-mean squared error.

    Returns ``(loss, grads)`` with ``grads`` a ModelParameters holding the
    gradient of every weight.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.size == 0:
        raise ValueError("empty batch")
    preds, last, caches = forward_batch(config, params, windows, keep_cache=True)
    resid = preds - targets
    loss = float(np.mean(resid * resid))
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss{where}")

    dpred = 2.0 * resid / targets.size
    dense_w = last.T @ dpred
    dense_b = float(dpred.sum())
    T = config.window_size
    dhs = np.zeros((T, targets.size, params.dense_w.size))
    dhs[-1] = np.outer(dpred, params.dense_w)

    layer_grads = []
    for layer, (xs, hs, cache) in zip(reversed(params.layers), reversed(caches)):
        dxs, dW, dU, db = _backward_layer(config.cell, xs, layer.W, layer.U, hs, cache, dhs)
        layer_grads.append((dW, dU, db))
        dhs = dxs
    arrays = [a for g in reversed(layer_grads) for a in g] + [dense_w, dense_b]
    grads = ModelParameters.from_arrays(arrays)
    for name, a in grads.arrays():
        if not np.all(np.isfinite(a)):
            raise NumericError(f"non-finite gradient in {name}{where}")
    return loss, grads


def batch_loss(config, params, windows, targets):
    preds, _, _ = forward_batch(config, params, windows)
    return mse(preds, np.asarray(targets, dtype=np.float64).reshape(-1))


@dataclass
class GradientCheckReport:
    errors: dict
    tol: float
    flagged: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.flagged


def check_gradients(config, params, windows, targets, fd_step=1e-5, tol=1e-4,
                    gradients=None, floor=1e-6):
    """Compare analytic gradients against central differences, block by block.

    The error of one entry is ``|g - fd| / max(|g|, |fd|, floor)``; a block's
    error is the maximum over its entries. Pass ``gradients`` to check a
    gradient other than the BPTT one (fault-injection tests do this).
    """
    if params.size() > GRADCHECK_MAX_PARAMS:
        raise ValueError(f"gradient check limited to {GRADCHECK_MAX_PARAMS} parameters, "
                         f"model has {params.size()}")
    if gradients is None:
        _, gradients = bptt_gradients(config, params, windows, targets)
    base = [a.copy() for _, a in params.arrays()]
    names = [n for n, _ in params.arrays()]
    errors, flagged = {}, []
    for k, (name, g) in enumerate(gradients.arrays()):
        fd = np.empty(base[k].size)
        for j in range(base[k].size):
            probe = [a.copy() for a in base]
            probe[k].flat[j] += fd_step
            up = batch_loss(config, ModelParameters.from_arrays(probe), windows, targets)
            probe[k].flat[j] -= 2 * fd_step
            down = batch_loss(config, ModelParameters.from_arrays(probe), windows, targets)
            fd[j] = (up - down) / (2 * fd_step)
        g = np.asarray(g, dtype=np.float64).ravel()
        denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), floor)
        err = float(np.max(np.abs(g - fd) / denom)) if g.size else 0.0
        errors[names[k]] = err
        if not err <= tol:
            flagged.append(names[k])
    return GradientCheckReport(errors, tol, flagged)


@dataclass
class TrainReport:
    train_loss: list
    val_loss: list
    seconds: float
    config: dict
    n_train: int
    n_val: int

    def to_dict(self, timing=True):
        d = {"train_loss": self.train_loss, "val_loss": self.val_loss,
             "n_train": self.n_train, "n_val": self.n_val, "config": self.config}
        if timing:
            d["seconds"] = self.seconds
        return d


def validation_count(n, fraction):
    return int(round(n * fraction)) if fraction > 0 else 0


def _clip(grads, max_norm):
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm <= max_norm:
        return grads
    return [g * (max_norm / norm) for g in grads]


def train(config, dataset, params=None, log=None):
    """Fit ``config`` to a windowed dataset with mini-batch RMSProp.

    The last ``validation_fraction`` of windows (chronological tail) is held
    out and scored with frozen weights after each epoch. Batches run in
    chronological order unless ``config.shuffle`` is set. Returns the
    final-epoch weights and a TrainReport.
    """
    n = len(dataset)
    if n < MIN_DATASET:
        raise DatasetTooSmallError(f"need at least {MIN_DATASET} windows, got {n}")
    if dataset.w != config.window_size:
        raise ValueError(f"dataset window {dataset.w} != config window {config.window_size}")
    n_val = validation_count(n, config.validation_fraction)
    n_fit = n - n_val
    X, y = dataset.inputs[:n_fit], dataset.targets[:n_fit]
    Xv, yv = dataset.inputs[n_fit:], dataset.targets[n_fit:]

    params = init_params(config) if params is None else params.copy()
    arrays = [a for _, a in params.arrays()]
    state = OptimizerState.zeros_like(arrays, learning_rate=config.learning_rate,
                                      rho=config.rho, epsilon=config.epsilon)
    order_rng = np.random.default_rng([config.seed, 1])
    train_loss, val_loss = [], []
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        order = order_rng.permutation(n_fit) if config.shuffle else np.arange(n_fit)
        total = 0.0
        for b, start in enumerate(range(0, n_fit, config.batch_size)):
            idx = order[start:start + config.batch_size]
            loss, grads = bptt_gradients(config, params, X[idx], y[idx],
                                         where=f" (epoch {epoch + 1}, batch {b + 1})")
            g = [a for _, a in grads.arrays()]
            if config.clip_norm:
                g = _clip(g, config.clip_norm)
            arrays = rmsprop_step(arrays, g, state)
            params = ModelParameters.from_arrays(arrays)
            total += loss * len(idx)
        train_loss.append(total / n_fit)
        if n_val:
            vl = batch_loss(config, params, Xv, yv)
            if not np.isfinite(vl):
                raise NumericError(f"non-finite validation loss (epoch {epoch + 1})")
            val_loss.append(vl)
        if log is not None:
            log(epoch + 1, train_loss[-1], val_loss[-1] if n_val else None)
    report = TrainReport(train_loss, val_loss, time.perf_counter() - t0,
                         config.to_dict(), n_fit, n_val)
    return params, report
