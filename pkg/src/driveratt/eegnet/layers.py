"""Hand-derived forward/backward passes for every layer in the network.

Array convention throughout: (batch, channel, time, maps). Convolutions act
along the time axis only, except the depthwise spatial filter which collapses
the channel axis. All math runs in float64; each layer caches what its
backward pass needs during a training-mode forward.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


class ForwardCtx:
    """Per-call forward context: mode, dropout RNG, batch-norm stat source."""

    def __init__(self, training: bool, rng: np.random.Generator | None = None,
                 frozen_stats: bool = False):
        self.training = training
        self.rng = rng
        self.frozen_stats = frozen_stats


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _pad_time(x: np.ndarray, left: int, right: int) -> np.ndarray:
    pad = [(0, 0)] * x.ndim
    pad[2] = (left, right)
    return np.pad(x, pad)


def _fold_taps(dwin: np.ndarray, time_axis: int) -> np.ndarray:
    """col2im along time in one pass.

    dwin[..., t, ..., f] (tap index f on the last axis) holds the gradient
    w.r.t. window element t + f; returns the summed gradient on the padded
    time axis, length T + F - 1. Implemented as an anti-diagonal sum over a
    zero-padded strided view, so the tap loop costs one read of dwin.
    """
    f = dwin.shape[-1]
    t = dwin.shape[time_axis]
    if f == 1:
        return dwin[..., 0]
    pad = [(0, 0)] * dwin.ndim
    pad[time_axis] = (f - 1, f - 1)
    padded = np.pad(dwin, pad)
    view_shape = list(padded.shape)
    view_shape[time_axis] = t + f - 1
    strides = list(padded.strides)
    strides[-1] = padded.strides[-1] - padded.strides[time_axis]
    offset = (f - 1) * (padded.strides[time_axis] // padded.itemsize)
    base = padded.reshape(-1)[offset:]
    view = np.lib.stride_tricks.as_strided(base, shape=tuple(view_shape),
                                           strides=tuple(strides))
    return view.sum(axis=-1)


class TemporalConv:
    """1 x F convolution along time, same-padded, single input map, no bias.

    weight shape (F, K): out[b,c,t,k] = sum_f x_pad[b,c,t+f,0] * w[f,k].
    """

    def __init__(self, kernel_len: int, n_kernels: int, rng: np.random.Generator):
        self.kernel_len = kernel_len
        self.n_kernels = n_kernels
        self.w = glorot_uniform(rng, (kernel_len, n_kernels),
                                fan_in=kernel_len, fan_out=kernel_len * n_kernels)
        self.gw = np.zeros_like(self.w)
        self._cache = None

    def out_shape(self, in_shape):
        b, c, t, m = in_shape
        return (b, c, t, self.n_kernels)

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        if x.shape[3] != 1:
            raise ShapeMismatch(f"temporal conv expects 1 input map, got {x.shape[3]}")
        f = self.kernel_len
        pl = (f - 1) // 2
        xp = _pad_time(x[..., 0], pl, f - 1 - pl)  # (B, C, T + F - 1)
        # materialize the window tensor once; forward and the weight
        # gradient both consume it as a flat 2-D matmul operand
        win = np.ascontiguousarray(sliding_window_view(xp, f, axis=2))  # (B, C, T, F)
        b, c, t, _ = win.shape
        out = (win.reshape(-1, f) @ self.w).reshape(b, c, t, self.n_kernels)
        if ctx.training:
            self._cache = win
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:
        win = self._cache
        f = self.kernel_len
        pl = (f - 1) // 2
        b, c, t, k = g.shape
        g2 = g.reshape(-1, k)
        self.gw = win.reshape(-1, f).T @ g2
        # col2im, tap-major: row tap of (w @ g2.T) is the contiguous
        # (B*C, T) slab of window-gradient for that kernel tap; folding is
        # then F shifted adds over contiguous memory
        taps = self.w @ g2.T  # (F, B*C*T)
        dxp = np.zeros((b * c, t + f - 1))
        for tap in range(f):
            dxp[:, tap : tap + t] += taps[tap].reshape(b * c, t)
        return dxp.reshape(b, c, -1)[:, :, pl : pl + t, None]

    def param_items(self):
        return [("w", self.w)]

    def grad_items(self):
        return [("w", self.gw)]


class DepthwiseSpatialConv:
    """C x 1 filter spanning the full electrode axis, depth multiplier D.

    weight shape (M, D, C): out[b,0,t,m*D+d] = sum_c x[b,c,t,m] * w[m,d,c].
    """

    def __init__(self, n_channels: int, in_maps: int, depth_multiplier: int,
                 rng: np.random.Generator):
        self.n_channels = n_channels
        self.in_maps = in_maps
        self.depth = depth_multiplier
        self.w = glorot_uniform(rng, (in_maps, depth_multiplier, n_channels),
                                fan_in=n_channels,
                                fan_out=n_channels * depth_multiplier)
        self.gw = np.zeros_like(self.w)
        self._cache = None

    def out_shape(self, in_shape):
        b, c, t, m = in_shape
        return (b, 1, t, m * self.depth)

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        if x.shape[1] != self.n_channels or x.shape[3] != self.in_maps:
            raise ShapeMismatch(
                f"depthwise conv expects (B, {self.n_channels}, T, {self.in_maps}), "
                f"got {x.shape}"
            )
        out = np.einsum("bctm,mdc->btmd", x, self.w, optimize=True)
        b, t = x.shape[0], x.shape[2]
        if ctx.training:
            self._cache = x
        return out.reshape(b, 1, t, self.in_maps * self.depth)

    def backward(self, g: np.ndarray) -> np.ndarray:
        x = self._cache
        b, _, t, _ = g.shape
        g4 = g.reshape(b, t, self.in_maps, self.depth)
        self.gw = np.einsum("bctm,btmd->mdc", x, g4, optimize=True)
        return np.einsum("btmd,mdc->bctm", g4, self.w, optimize=True)

    def max_norm_rows(self, cap: float) -> None:
        """Project each (map, depth) spatial filter onto the L2 ball of radius cap."""
        norms = np.linalg.norm(self.w, axis=2, keepdims=True)
        factor = np.minimum(1.0, cap / np.maximum(norms, 1e-12))
        self.w *= factor

    def param_items(self):
        return [("w", self.w)]

    def grad_items(self):
        return [("w", self.gw)]


class BatchNorm:
    """Per-map normalization across (batch, channel, time).

    Biased batch variance is used both for normalization and for the running
    statistics, updated as running = momentum * running + (1 - momentum) * batch.
    Inference (and frozen_stats) normalizes with the running statistics.
    """

    def __init__(self, n_maps: int, eps: float = 1e-3, momentum: float = 0.99):
        self.n_maps = n_maps
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(n_maps)
        self.beta = np.zeros(n_maps)
        self.running_mean = np.zeros(n_maps)
        self.running_var = np.ones(n_maps)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)
        self._cache = None

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        if x.shape[3] != self.n_maps:
            raise ShapeMismatch(f"batch norm expects {self.n_maps} maps, got {x.shape[3]}")
        use_batch = ctx.training and not ctx.frozen_stats
        flat = x.reshape(-1, x.shape[3])
        if use_batch:
            mean = flat.mean(axis=0)
            # one-pass biased variance via einsum (no squared temp);
            # max(0) guards tiny negative rounding
            sumsq = np.einsum("nm,nm->m", flat, flat)
            var = np.maximum(sumsq / flat.shape[0] - mean * mean, 0.0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        # fused y = x * a + c with a = gamma/std, c = beta - mean * a
        a = self.gamma * inv_std
        out = x * a
        out += self.beta - mean * a
        if ctx.training:
            self._cache = (x, mean, inv_std, use_batch)
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:
        x, mean, inv_std, used_batch = self._cache
        gflat = g.reshape(-1, g.shape[3])
        xflat = x.reshape(-1, x.shape[3])
        sum_gx = np.einsum("nm,nm->m", gflat, xflat)
        self.gbeta = gflat.sum(axis=0)
        # sum(g * xhat) without materializing xhat
        self.ggamma = inv_std * (sum_gx - mean * self.gbeta)
        if not used_batch:
            # statistics were constants, so the chain stops at xhat
            return g * (self.gamma * inv_std)
        m = gflat.shape[0]
        # dx = (gamma*inv_std/m) * (m*g - sum(g) - xhat*sum(g*xhat))
        #    = A*g + B*x + C with per-map scalars
        coeff = self.gamma * inv_std / m
        a = coeff * m
        b = -coeff * inv_std * self.ggamma
        c = -coeff * self.gbeta + mean * coeff * inv_std * self.ggamma
        dx = g * a
        dx += x * b
        dx += c
        return dx

    def param_items(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def grad_items(self):
        return [("gamma", self.ggamma), ("beta", self.gbeta)]

    def state_items(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class Elu:
    """ELU with alpha = 1."""

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        out = np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
        if ctx.training:
            self._cache = (x > 0, out)
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:
        pos, out = self._cache
        return g * np.where(pos, 1.0, out + 1.0)

    def param_items(self):
        return []

    def grad_items(self):
        return []


class AvgPoolTime:
    """Ceil-mode average pooling along time; the divisor counts only the
    elements actually present, so a constant input stays constant."""

    def __init__(self, pool: int):
        self.pool = pool
        self._cache = None

    def out_shape(self, in_shape):
        b, c, t, m = in_shape
        return (b, c, -(-t // self.pool), m)

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        t = x.shape[2]
        starts = np.arange(0, t, self.pool)
        counts = np.minimum(starts + self.pool, t) - starts
        sums = np.add.reduceat(x, starts, axis=2)
        if ctx.training:
            self._cache = (t, counts)
        return sums / counts[None, None, :, None]

    def backward(self, g: np.ndarray) -> np.ndarray:
        t, counts = self._cache
        scaled = g / counts[None, None, :, None]
        return np.repeat(scaled, counts, axis=2)

    def param_items(self):
        return []

    def grad_items(self):
        return []


class Dropout:
    """Inverted dropout: active only in training, identity otherwise."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self._mask = None

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        if not ctx.training or self.p == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (ctx.rng.random(x.shape) >= self.p) / keep
        return x * self._mask

    def backward(self, g: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return g
        return g * self._mask

    def param_items(self):
        return []

    def grad_items(self):
        return []


class SeparableDepthwiseTime:
    """Per-map 1 x F filter along time, same-padded (first half of the
    separable convolution). weight shape (M, F)."""

    def __init__(self, n_maps: int, kernel_len: int, rng: np.random.Generator):
        self.n_maps = n_maps
        self.kernel_len = kernel_len
        self.w = glorot_uniform(rng, (n_maps, kernel_len),
                                fan_in=kernel_len, fan_out=kernel_len)
        self.gw = np.zeros_like(self.w)
        self._cache = None

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        if x.shape[3] != self.n_maps:
            raise ShapeMismatch(f"separable depthwise expects {self.n_maps} maps, got {x.shape[3]}")
        f = self.kernel_len
        pl = (f - 1) // 2
        xp = _pad_time(x, pl, f - 1 - pl)
        win = sliding_window_view(xp, f, axis=2)  # (B, 1, T, M, F)
        out = np.einsum("bltmf,mf->bltm", win, self.w)
        if ctx.training:
            self._cache = win
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:
        win = self._cache
        f = self.kernel_len
        pl = (f - 1) // 2
        t = g.shape[2]
        self.gw = np.einsum("bltmf,bltm->mf", win, g)
        # col2im as in TemporalConv, per-map kernels; taps already sit on
        # the last axis of dwin[b, 1, t, m, f]
        dwin = g[..., None] * self.w[None, None, None, :, :]  # (B, 1, T, M, F)
        folded = _fold_taps(dwin, time_axis=2)  # (B, 1, T + F - 1, M)
        return folded[:, :, pl : pl + t, :]

    def param_items(self):
        return [("w", self.w)]

    def grad_items(self):
        return [("w", self.gw)]


class PointwiseConv:
    """1 x 1 map-mixing convolution, no bias. weight shape (M_in, M_out)."""

    def __init__(self, in_maps: int, out_maps: int, rng: np.random.Generator):
        self.in_maps = in_maps
        self.out_maps = out_maps
        self.w = glorot_uniform(rng, (in_maps, out_maps),
                                fan_in=in_maps, fan_out=out_maps)
        self.gw = np.zeros_like(self.w)
        self._cache = None

    def out_shape(self, in_shape):
        b, c, t, m = in_shape
        return (b, c, t, self.out_maps)

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        if x.shape[3] != self.in_maps:
            raise ShapeMismatch(f"pointwise conv expects {self.in_maps} maps, got {x.shape[3]}")
        if ctx.training:
            self._cache = x
        return x @ self.w

    def backward(self, g: np.ndarray) -> np.ndarray:
        x = self._cache
        self.gw = np.tensordot(x, g, axes=([0, 1, 2], [0, 1, 2]))
        return g @ self.w.T

    def param_items(self):
        return [("w", self.w)]

    def grad_items(self):
        return [("w", self.gw)]


class Dense:
    """Flatten + affine map to a single logit. weight shape (n_in, 1)."""

    def __init__(self, n_in: int, rng: np.random.Generator):
        self.n_in = n_in
        self.w = glorot_uniform(rng, (n_in, 1), fan_in=n_in, fan_out=1)
        self.b = np.zeros(1)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray, ctx: ForwardCtx) -> np.ndarray:
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.n_in:
            raise ShapeMismatch(
                f"dense layer expects {self.n_in} inputs, got {flat.shape[1]} "
                f"(input shape {x.shape})"
            )
        if ctx.training:
            self._cache = (flat, x.shape)
        return flat @ self.w + self.b

    def backward(self, g: np.ndarray) -> np.ndarray:
        flat, in_shape = self._cache
        self.gw = flat.T @ g
        self.gb = g.sum(axis=0)
        return (g @ self.w.T).reshape(in_shape)

    def max_norm(self, cap: float) -> None:
        """Project each output unit's weight vector onto the cap ball."""
        norms = np.linalg.norm(self.w, axis=0, keepdims=True)
        factor = np.minimum(1.0, cap / np.maximum(norms, 1e-12))
        self.w *= factor

    def param_items(self):
        return [("w", self.w), ("b", self.b)]

    def grad_items(self):
        return [("w", self.gw), ("b", self.gb)]


SIGMOID_CLAMP = 15.0


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function with the logit clamped to +-15 before exponentiation."""
    zc = np.clip(z, -SIGMOID_CLAMP, SIGMOID_CLAMP)
    return 1.0 / (1.0 + np.exp(-zc))
