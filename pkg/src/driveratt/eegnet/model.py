"""The compact EEG convolutional network: config, forward, backward, Adam.

Block structure (shapes at the 30-channel / 1501-sample defaults):

    input                    (30, 1501, 1)
    temporal conv, same pad  (30, 1501, 32)
    batch norm               (30, 1501, 32)
    depthwise spatial conv   (1, 1501, 128)
    batch norm + ELU         (1, 1501, 128)
    avg pool 1x16 (ceil)     (1, 94, 128)
    dropout
    separable conv (dw + pw) (1, 94, 32)
    batch norm + ELU         (1, 94, 32)
    avg pool 1x8 (ceil)      (1, 12, 32)
    dropout
    flatten                  384
    dense + sigmoid          1

Backprop is hand-derived per layer; the optimizer is Adam with bias
correction followed by max-norm projection of the depthwise spatial filters
(cap 1.0) and the dense weight vector (cap 0.25).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import EmptyDataset, NotForwarded, ShapeMismatch
from .layers import (
    AvgPoolTime,
    BatchNorm,
    Dense,
    DepthwiseSpatialConv,
    Dropout,
    Elu,
    ForwardCtx,
    PointwiseConv,
    SeparableDepthwiseTime,
    TemporalConv,
    sigmoid,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class EEGNetConfig:
    n_channels: int = 30
    n_timepoints: int = 1501
    temporal_kernels: int = 32  # K1
    temporal_len: int = 128  # F1
    depth_multiplier: int = 4  # D
    sep_kernels: int = 32  # K2
    sep_len: int = 16  # F2
    pool1: int = 16
    pool2: int = 8
    dropout_p: float = 0.5
    learning_rate: float = 0.0001
    batch_size: int = 32
    epochs: int = 60
    bn_eps: float = 1e-3
    bn_momentum: float = 0.99
    depthwise_max_norm: float = 1.0
    dense_max_norm: float = 0.25

    def __post_init__(self) -> None:
        for name in ("n_channels", "n_timepoints", "temporal_kernels", "temporal_len",
                     "depth_multiplier", "sep_kernels", "sep_len", "pool1", "pool2",
                     "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")

    @property
    def depthwise_maps(self) -> int:
        return self.temporal_kernels * self.depth_multiplier

    @property
    def pool1_out(self) -> int:
        return math.ceil(self.n_timepoints / self.pool1)

    @property
    def pool2_out(self) -> int:
        return math.ceil(self.pool1_out / self.pool2)

    @property
    def flatten_size(self) -> int:
        return self.pool2_out * self.sep_kernels

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EEGNetConfig":
        return cls(**d)


def shape_trace(cfg: EEGNetConfig) -> list[tuple[str, tuple]]:
    """Per-sample output shape of every block row, (channels, time, maps)
    triples plus the scalar flatten/dense sizes."""
    c, t = cfg.n_channels, cfg.n_timepoints
    return [
        ("input", (c, t, 1)),
        ("temporal_conv", (c, t, cfg.temporal_kernels)),
        ("batchnorm_1", (c, t, cfg.temporal_kernels)),
        ("depthwise_conv", (1, t, cfg.depthwise_maps)),
        ("batchnorm_2", (1, t, cfg.depthwise_maps)),
        ("avgpool_1", (1, cfg.pool1_out, cfg.depthwise_maps)),
        ("dropout_1", (1, cfg.pool1_out, cfg.depthwise_maps)),
        ("separable_conv", (1, cfg.pool1_out, cfg.sep_kernels)),
        ("batchnorm_3", (1, cfg.pool1_out, cfg.sep_kernels)),
        ("avgpool_2", (1, cfg.pool2_out, cfg.sep_kernels)),
        ("dropout_2", (1, cfg.pool2_out, cfg.sep_kernels)),
        ("flatten", (cfg.flatten_size,)),
        ("dense", (1,)),
    ]


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)


class EEGNetModel:
    """Full parameter set plus Adam state for one network instance."""

    def __init__(self, config: EEGNetConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        cfg = config
        self.conv1 = TemporalConv(cfg.temporal_len, cfg.temporal_kernels, rng)
        self.bn1 = BatchNorm(cfg.temporal_kernels, cfg.bn_eps, cfg.bn_momentum)
        self.dw = DepthwiseSpatialConv(cfg.n_channels, cfg.temporal_kernels,
                                       cfg.depth_multiplier, rng)
        self.bn2 = BatchNorm(cfg.depthwise_maps, cfg.bn_eps, cfg.bn_momentum)
        self.elu1 = Elu()
        self.pool1 = AvgPoolTime(cfg.pool1)
        self.drop1 = Dropout(cfg.dropout_p)
        self.sep_dw = SeparableDepthwiseTime(cfg.depthwise_maps, cfg.sep_len, rng)
        self.pointwise = PointwiseConv(cfg.depthwise_maps, cfg.sep_kernels, rng)
        self.bn3 = BatchNorm(cfg.sep_kernels, cfg.bn_eps, cfg.bn_momentum)
        self.elu2 = Elu()
        self.pool2 = AvgPoolTime(cfg.pool2)
        self.drop2 = Dropout(cfg.dropout_p)
        self.dense = Dense(cfg.flatten_size, rng)
        self._layers = [
            ("conv1", self.conv1),
            ("bn1", self.bn1),
            ("dw", self.dw),
            ("bn2", self.bn2),
            ("elu1", self.elu1),
            ("pool1", self.pool1),
            ("drop1", self.drop1),
            ("sep_dw", self.sep_dw),
            ("pointwise", self.pointwise),
            ("bn3", self.bn3),
            ("elu2", self.elu2),
            ("pool2", self.pool2),
            ("drop2", self.drop2),
            ("dense", self.dense),
        ]
        self.adam_m = {k: np.zeros_like(v) for k, v in self.parameters().items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.parameters().items()}
        self.adam_t = 0
        self._probs = None
        self._ready = False

    # -- parameter plumbing -------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self._layers:
            for pname, arr in layer.param_items():
                out[f"{lname}.{pname}"] = arr
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self._layers:
            for pname, arr in layer.grad_items():
                out[f"{lname}.{pname}"] = arr
        return out

    def bn_state(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self._layers:
            if isinstance(layer, BatchNorm):
                for sname, arr in layer.state_items():
                    out[f"{lname}.{sname}"] = arr
        return out

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        lname, pname = name.split(".")
        layer = dict(self._layers)[lname]
        current = getattr(layer, pname)
        if current.shape != value.shape:
            raise ShapeMismatch(f"{name}: expected shape {current.shape}, got {value.shape}")
        current[...] = value

    # -- forward / backward -------------------------------------------------

    def forward(self, batch: np.ndarray, training: bool = False,
                seed: int | None = None, frozen_stats: bool = False) -> np.ndarray:
        """Probabilities for a (B, C, T, 1) batch, shape (B, 1).

        Dropout is active only when training and draws from a generator
        seeded per call, so identical (params, batch, seed) always give
        identical outputs.
        """
        cfg = self.config
        x = np.asarray(batch, dtype=np.float64)
        expected = (cfg.n_channels, cfg.n_timepoints, 1)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ShapeMismatch(f"expected batch of shape (B, {expected[0]}, "
                                f"{expected[1]}, 1), got {x.shape}")
        rng = np.random.default_rng(seed if seed is not None else 0)
        ctx = ForwardCtx(training=training, rng=rng, frozen_stats=frozen_stats)
        for _, layer in self._layers:
            x = layer.forward(x, ctx)
        probs = sigmoid(x)
        if not np.all(np.isfinite(probs)):
            raise FloatingPointError("non-finite network output")
        self._probs = probs
        self._ready = training
        return probs

    def backward(self, labels: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of mean BCE w.r.t. every parameter, keyed like parameters().

        Requires a preceding training-mode forward (cached intermediates).
        """
        if not self._ready:
            raise NotForwarded("backward requires a training-mode forward first")
        y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
        if y.shape[0] != self._probs.shape[0]:
            raise ShapeMismatch(f"{y.shape[0]} labels for a batch of {self._probs.shape[0]}")
        b = y.shape[0]
        # d(mean BCE)/d(logit) for a sigmoid output
        g = (self._probs - y) / b
        for _, layer in reversed(self._layers):
            g = layer.backward(g)
        return self.gradients()

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(batch, training=False)

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Hard labels; probability exactly 0.5 goes to class 1."""
        return (self.predict_proba(batch) >= 0.5).astype(np.int64).ravel()

    # -- optimizer ----------------------------------------------------------

    def adam_step(self, grads: dict[str, np.ndarray]) -> None:
        """One bias-corrected Adam update followed by max-norm projection."""
        params = self.parameters()
        if set(grads) != set(params):
            raise ShapeMismatch("gradient keys do not match parameters")
        self.adam_t += 1
        t = self.adam_t
        lr = self.config.learning_rate
        for k, p in params.items():
            g = grads[k]
            if g.shape != p.shape:
                raise ShapeMismatch(f"{k}: gradient shape {g.shape} != {p.shape}")
            m = self.adam_m[k]
            v = self.adam_v[k]
            m[...] = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
            v[...] = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
            mhat = m / (1 - ADAM_BETA1**t)
            vhat = v / (1 - ADAM_BETA2**t)
            p -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
        self.apply_max_norm()

    def apply_max_norm(self) -> None:
        self.dw.max_norm_rows(self.config.depthwise_max_norm)
        self.dense.max_norm(self.config.dense_max_norm)


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy; probabilities clamped 1e-7 from each edge."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ShapeMismatch(f"probs shape {p.shape} != labels shape {y.shape}")
    if p.size == 0:
        raise EmptyDataset("loss of an empty batch")
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
