"""Recurrent models: configuration, parameters, cell steps and forward pass."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import kernels
from .data import ScalerParams

ARCHITECTURES = ("SimpleRNN", "LSTM", "GRU", "StackedRNN", "StackedLSTM", "StackedGRU")
GATES = {"RNN": 1, "LSTM": 4, "GRU": 3}
FORMAT_VERSION = 1

# (architecture, hidden_units, window) rows of the architecture sweep
TABLE1_PRESETS = (
    ("SimpleRNN", (150,), 7),
    ("LSTM", (150,), 8),
    ("GRU", (100,), 8),
    ("StackedRNN", (200, 50), 5),
    ("StackedLSTM", (150, 50), 8),
    ("StackedGRU", (50, 50), 8),
)


class StructureError(ValueError):
    """Shapes or configuration do not fit together."""


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "LSTM"
    hidden_units: tuple = (150,)
    window_size: int = 8
    seed: int = 0
    epochs: int = 100
    validation_fraction: float = 0.10
    learning_rate: float = 0.001
    batch_size: int = 32
    rho: float = 0.9
    epsilon: float = 1e-7
    shuffle: bool = False
    clip_norm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_units", tuple(int(h) for h in self.hidden_units))
        if self.architecture not in ARCHITECTURES:
            raise StructureError(f"unknown architecture {self.architecture!r}")
        want = 2 if self.stacked else 1
        if len(self.hidden_units) != want:
            raise StructureError(
                f"{self.architecture} needs {want} hidden_units entr{'ies' if want > 1 else 'y'}, "
                f"got {list(self.hidden_units)}")
        if any(h < 1 for h in self.hidden_units) or self.window_size < 1:
            raise StructureError("hidden_units and window_size must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise StructureError("epochs and batch_size must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise StructureError("validation_fraction must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise StructureError("seed must be an unsigned 64-bit integer")

    @property
    def stacked(self):
        return self.architecture.startswith("Stacked")

    @property
    def cell(self):
        """``"RNN"``, ``"LSTM"`` or ``"GRU"``."""
        base = self.architecture.removeprefix("Stacked")
        return "RNN" if base == "SimpleRNN" else base

    @property
    def gates(self):
        return GATES[self.cell]

    def describe(self):
        units = ",".join(str(h) for h in self.hidden_units)
        return f"{self.architecture}/[{units}]/w={self.window_size}"

    def to_dict(self):
        d = asdict(self)
        d["hidden_units"] = list(self.hidden_units)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class LayerParams:
    W: np.ndarray  # (input_dim, gates * H)
    U: np.ndarray  # (H, gates * H)
    b: np.ndarray  # (gates * H,)

    @property
    def hidden(self):
        return self.U.shape[0]


@dataclass
class ModelParameters:
    layers: list
    dense_w: np.ndarray  # (H_last,)
    dense_b: float = 0.0

    def arrays(self):
        """Every trainable array, in a fixed order, as ``(name, array)`` pairs."""
        out = []
        for k, layer in enumerate(self.layers):
            out += [(f"layer{k}.W", layer.W), (f"layer{k}.U", layer.U), (f"layer{k}.b", layer.b)]
        out += [("dense.w", self.dense_w), ("dense.b", np.atleast_1d(self.dense_b))]
        return out

    @classmethod
    def from_arrays(cls, arrays):
        arrays = list(arrays)
        *rec, dense_w, dense_b = arrays
        layers = [LayerParams(*(np.array(a, dtype=np.float64) for a in rec[k:k + 3]))
                  for k in range(0, len(rec), 3)]
        return cls(layers, np.array(dense_w, dtype=np.float64),
                   float(np.asarray(dense_b).reshape(-1)[0]))

    def copy(self):
        return ModelParameters.from_arrays(a.copy() for _, a in self.arrays())

    def size(self):
        return sum(a.size for _, a in self.arrays())

    def check(self, config):
        in_dim = 1
        if len(self.layers) != len(config.hidden_units):
            raise StructureError("layer count does not match config")
        for layer, H in zip(self.layers, config.hidden_units):
            G = config.gates
            if (layer.W.shape != (in_dim, G * H) or layer.U.shape != (H, G * H)
                    or layer.b.shape != (G * H,)):
                raise StructureError(f"layer shapes do not match {config.describe()}")
            in_dim = H
        if self.dense_w.shape != (in_dim,):
            raise StructureError("dense weight shape does not match last layer")
        for name, a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise StructureError(f"{name} has non-finite entries")


def _glorot(rng, fan_in, fan_out, shape):
    s = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def init_params(config):
    """Glorot-uniform kernels, zero biases, LSTM forget bias 1.

    Draws come from numpy's PCG64 generator seeded with ``config.seed``.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    G = config.gates
    layers, in_dim = [], 1
    for H in config.hidden_units:
        W = _glorot(rng, in_dim, G * H, (in_dim, G * H))
        U = _glorot(rng, H, G * H, (H, G * H))
        b = np.zeros(G * H)
        if config.cell == "LSTM":
            b[H:2 * H] = 1.0
        layers.append(LayerParams(W, U, b))
        in_dim = H
    dense_w = _glorot(rng, in_dim, 1, (in_dim,))
    return ModelParameters(layers, dense_w, 0.0)


def tanh_act(x):
    return np.tanh(x)


def hard_sigmoid(x):
    """``clamp(0.2 * x + 0.5, 0, 1)``."""
    return kernels.hard_sigmoid(np.asarray(x, dtype=np.float64))


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray | None = None

    @classmethod
    def zeros(cls, H, lstm=True):
        return cls(np.zeros(H), np.zeros(H) if lstm else None)


def _step_inputs(x_t, h, layer):
    x = np.atleast_1d(np.asarray(x_t, dtype=np.float64))
    h = np.asarray(h, dtype=np.float64)
    if x.shape != (layer.W.shape[0],) or h.shape != (layer.hidden,):
        raise StructureError(
            f"step input {x.shape}/state {h.shape} do not fit kernel {layer.W.shape}")
    return x.reshape(1, 1, -1), h


def lstm_cell_step(x_t, state, layer):
    """One LSTM step; returns ``(h_next, c_next, layer_output)``."""
    xs, h = _step_inputs(x_t, state.h, layer)
    H = layer.hidden
    a = xs[0, 0] @ layer.W + h @ layer.U + layer.b
    i = hard_sigmoid(a[:H])
    f = hard_sigmoid(a[H:2 * H])
    g = np.tanh(a[2 * H:3 * H])
    o = hard_sigmoid(a[3 * H:])
    c = f * np.asarray(state.c, dtype=np.float64) + i * g
    h_next = o * np.tanh(c)
    return h_next, c, h_next


def gru_cell_step(x_t, h_prev, layer):
    xs, h = _step_inputs(x_t, h_prev, layer)
    H = layer.hidden
    z = hard_sigmoid(xs[0, 0] @ layer.W[:, :H] + h @ layer.U[:, :H] + layer.b[:H])
    r = hard_sigmoid(xs[0, 0] @ layer.W[:, H:2 * H] + h @ layer.U[:, H:2 * H] + layer.b[H:2 * H])
    cand = np.tanh(xs[0, 0] @ layer.W[:, 2 * H:] + (r * h) @ layer.U[:, 2 * H:] + layer.b[2 * H:])
    return (1.0 - z) * h + z * cand


def rnn_cell_step(x_t, h_prev, layer):
    xs, h = _step_inputs(x_t, h_prev, layer)
    return np.tanh(xs[0, 0] @ layer.W + h @ layer.U + layer.b)


def run_layer(cell, xs, layer):
    """Run one layer over a time-major batch; returns ``(hs, cache)``."""
    if cell == "LSTM":
        hs, cs, pre, act = kernels.lstm_forward(xs, layer.W, layer.U, layer.b)
        return hs, (cs, pre, act)
    if cell == "GRU":
        hs, pre, act = kernels.gru_forward(xs, layer.W, layer.U, layer.b)
        return hs, (pre, act)
    return kernels.rnn_forward(xs, layer.W, layer.U, layer.b), ()


def as_time_major(windows):
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 1:
        windows = windows[None, :]
    return np.ascontiguousarray(windows.T[:, :, None])


def forward_batch(config, params, windows, keep_cache=False):
    """Forward pass over ``(B, w)`` windows.

    Returns ``(predictions (B,), last_hidden (B, H_last), caches)``; ``caches``
    is a per-layer list of ``(xs, hs, cache)`` when ``keep_cache`` is set.
    """
    xs = as_time_major(windows)
    if xs.shape[0] != config.window_size:
        raise StructureError(
            f"window length {xs.shape[0]} does not match w={config.window_size}")
    caches = []
    for layer in params.layers:
        hs, cache = run_layer(config.cell, xs, layer)
        if keep_cache:
            caches.append((xs, hs, cache))
        xs = np.ascontiguousarray(hs[1:])
    last = xs[-1]
    preds = last @ params.dense_w + params.dense_b
    return preds, last, caches


def forward(config, params, window, capture=False):
    """Predict the next value for one window; optionally return the last hidden state."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1:
        raise StructureError("forward takes a single 1-D window")
    preds, last, _ = forward_batch(config, params, window)
    return (float(preds[0]), last[0].copy() if capture else None)


@dataclass
class RecurrentModel:
    """A trained network plus the scaler of the series it was trained on."""
    config: ModelConfig
    params: ModelParameters
    scaler: ScalerParams | None = None
    training_region: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def window_size(self):
        return self.config.window_size

    def describe(self):
        return self.config.describe()

    def predict(self, windows, capture=False):
        preds, last, _ = forward_batch(self.config, self.params, windows)
        return (preds, last) if capture else preds

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "training_region": self.training_region,
            "scaler": self.scaler.to_dict() if self.scaler else None,
            "weights": [{"name": name, "shape": list(a.shape),
                         "data": [float(v) for v in a.ravel()]}
                        for name, a in self.params.arrays()],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format_version") != FORMAT_VERSION:
            raise StructureError(f"unsupported model format {d.get('format_version')!r}")
        config = ModelConfig.from_dict(d["config"])
        arrays = [np.array(w["data"], dtype=np.float64).reshape(w["shape"]) for w in d["weights"]]
        params = ModelParameters.from_arrays(arrays)
        params.check(config)
        scaler = ScalerParams.from_dict(d["scaler"]) if d.get("scaler") else None
        return cls(config, params, scaler, d.get("training_region"), d.get("meta", {}))

    def dumps(self):
        # float repr is the shortest string that round-trips the exact double
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
