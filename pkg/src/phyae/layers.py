"""Layer implementations for the sequential signal networks.

All layers operate on (batch, length, channels) float64 tensors and provide
an explicit backward pass.  Convolution follows the cross-correlation
convention; output length is floor((L + 2*pad - kernel)/stride) + 1.

Weight layout:
    Conv1D              w: (kernel, in_ch, out_ch)      b: (out_ch,)
    LocallyConnected1D  w: (out_len, kernel, in_ch, out_ch)  b: (out_len, out_ch)
    PositionwiseDense   w: (in_ch, out_ch)              b: (out_ch,)

Gradients accumulate into `gw`/`gb` on each backward call and are zeroed by
the optimizer after every step.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import channel as chan
from .errors import ConfigError


def glorot_uniform(rng, shape, fan_in, fan_out):
    if rng is None:
        return np.zeros(shape)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def check_input(x, in_channels, layer_name):
    if x.ndim != 3:
        raise ValueError(f"{layer_name}: expected a rank-3 (B, L, C) tensor, got shape {x.shape}")
    if in_channels is not None and x.shape[2] != in_channels:
        raise ValueError(
            f"{layer_name}: input has {x.shape[2]} channels, layer expects {in_channels} "
            f"(input shape {x.shape})")


class Layer:
    """Base class; passthrough channel counts mean 'any'."""

    in_channels: int | None = None
    out_channels: int | None = None
    trainable = False

    def forward(self, x, train=True):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def out_length(self, length: int) -> int:
        return length

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def spec(self) -> dict:
        raise NotImplementedError


def _windows(xp, kernel, stride):
    # (B, Lp, C) -> (B, Lout, kernel, C) strided view
    win = sliding_window_view(xp, kernel, axis=1)  # (B, Lp-k+1, C, k)
    return win[:, ::stride].transpose(0, 1, 3, 2)


class Conv1D(Layer):
    """1-D convolution (shared weights, symmetric zero padding)."""

    trainable = True

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=None, rng=None):
        if kernel_size < 1 or stride < 1 or in_channels < 1 or out_channels < 1:
            raise ConfigError("Conv1D sizes must be >= 1")
        if padding is None:
            padding = kernel_size // 2 if stride == 1 else 0
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.w = glorot_uniform(rng, (kernel_size, in_channels, out_channels),
                                kernel_size * in_channels, kernel_size * out_channels)
        self.b = np.zeros(out_channels)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def out_length(self, length):
        out = (length + 2 * self.padding - self.kernel_size) // self.stride + 1
        if out < 1:
            raise ConfigError(
                f"Conv1D(k={self.kernel_size}, s={self.stride}, p={self.padding}): "
                f"input length {length} gives empty output")
        return out

    def _pad(self, x):
        if self.padding == 0:
            return x
        return np.pad(x, ((0, 0), (self.padding, self.padding), (0, 0)))

    def forward(self, x, train=True):
        check_input(x, self.in_channels, "Conv1D")
        b, length, _ = x.shape
        lout = self.out_length(length)
        xp = self._pad(x)
        s = self.stride
        # im2col as contiguous shifted blocks: column layout (kernel-major,
        # channel-minor) matches w.reshape(k*cin, cout)
        cols = np.concatenate(
            [xp[:, j:j + s * (lout - 1) + 1:s, :] for j in range(self.kernel_size)],
            axis=2).reshape(b * lout, self.kernel_size * self.in_channels)
        y = cols @ self.w.reshape(-1, self.out_channels) + self.b
        if train:
            self._cache = (cols, x.shape, lout)
        return y.reshape(b, lout, self.out_channels)

    def backward(self, grad):
        cols, x_shape, lout = self._cache
        b, length, cin = x_shape
        if grad.shape != (b, lout, self.out_channels):
            raise ValueError(
                f"Conv1D backward: upstream gradient shape {grad.shape} != forward output "
                f"shape {(b, lout, self.out_channels)}")
        g2 = grad.reshape(b * lout, self.out_channels)
        self.gw += (cols.T @ g2).reshape(self.w.shape)
        self.gb += g2.sum(axis=0)
        gcols = (g2 @ self.w.reshape(-1, self.out_channels).T)
        gcols = gcols.reshape(b, lout, self.kernel_size * cin)
        lp = length + 2 * self.padding
        gxp = np.zeros((b, lp, cin))
        s = self.stride
        for j in range(self.kernel_size):
            gxp[:, j:j + s * (lout - 1) + 1:s] += gcols[:, :, j * cin:(j + 1) * cin]
        return gxp[:, self.padding:self.padding + length]

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def spec(self):
        return {"kind": "conv1d", "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size,
                "stride": self.stride, "padding": self.padding}


class LocallyConnected1D(Layer):
    """Convolution-shaped layer with an independent kernel at every output
    position.  Built for a fixed input length; other lengths are rejected.
    """

    trainable = True

    def __init__(self, in_channels, out_channels, kernel_size, input_length,
                 stride=1, padding=None, rng=None):
        if kernel_size < 1 or stride < 1 or in_channels < 1 or out_channels < 1:
            raise ConfigError("LocallyConnected1D sizes must be >= 1")
        if padding is None:
            padding = kernel_size // 2 if stride == 1 else 0
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.input_length = input_length
        lout = (input_length + 2 * padding - kernel_size) // stride + 1
        if lout < 1:
            raise ConfigError("LocallyConnected1D: empty output for the fixed length")
        self.output_length = lout
        self.w = glorot_uniform(rng, (lout, kernel_size, in_channels, out_channels),
                                kernel_size * in_channels, kernel_size * out_channels)
        self.b = np.zeros((lout, out_channels))
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def out_length(self, length):
        if length != self.input_length:
            raise ValueError(
                f"LocallyConnected1D is bound to input length {self.input_length}, "
                f"got {length}")
        return self.output_length

    def forward(self, x, train=True):
        check_input(x, self.in_channels, "LocallyConnected1D")
        self.out_length(x.shape[1])
        b = x.shape[0]
        xp = x if self.padding == 0 else np.pad(
            x, ((0, 0), (self.padding, self.padding), (0, 0)))
        win = _windows(xp, self.kernel_size, self.stride)  # (B, Lout, k, Cin)
        y = np.einsum("blkc,lkco->blo", win, self.w, optimize=True) + self.b
        if train:
            self._cache = (np.ascontiguousarray(win), x.shape)
        return y

    def backward(self, grad):
        win, x_shape = self._cache
        b, length, cin = x_shape
        if grad.shape != (b, self.output_length, self.out_channels):
            raise ValueError(
                f"LocallyConnected1D backward: gradient shape {grad.shape} != "
                f"{(b, self.output_length, self.out_channels)}")
        self.gw += np.einsum("blkc,blo->lkco", win, grad, optimize=True)
        self.gb += grad.sum(axis=0)
        gcols = np.einsum("blo,lkco->blkc", grad, self.w, optimize=True)
        lp = length + 2 * self.padding
        gxp = np.zeros((b, lp, cin))
        s = self.stride
        for j in range(self.kernel_size):
            gxp[:, j:j + s * (self.output_length - 1) + 1:s] += gcols[:, :, j]
        return gxp[:, self.padding:self.padding + length]

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def spec(self):
        return {"kind": "locally_connected1d", "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size,
                "stride": self.stride, "padding": self.padding,
                "input_length": self.input_length}


class PositionwiseDense(Layer):
    """Affine map applied independently at every position (shared weights);
    equivalent to Conv1D with kernel size 1."""

    trainable = True

    def __init__(self, in_channels, out_channels, rng=None):
        if in_channels < 1 or out_channels < 1:
            raise ConfigError("PositionwiseDense channel counts must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.w = glorot_uniform(rng, (in_channels, out_channels), in_channels, out_channels)
        self.b = np.zeros(out_channels)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x, train=True):
        check_input(x, self.in_channels, "PositionwiseDense")
        if train:
            self._cache = x
        return x @ self.w + self.b

    def backward(self, grad):
        x = self._cache
        if grad.shape != x.shape[:2] + (self.out_channels,):
            raise ValueError(
                f"PositionwiseDense backward: gradient shape {grad.shape} != "
                f"{x.shape[:2] + (self.out_channels,)}")
        self.gw += x.reshape(-1, self.in_channels).T @ grad.reshape(-1, self.out_channels)
        self.gb += grad.sum(axis=(0, 1))
        return grad @ self.w.T

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def spec(self):
        return {"kind": "positionwise_dense", "in_channels": self.in_channels,
                "out_channels": self.out_channels}


class Activation(Layer):
    """Elementwise ReLU, Sigmoid, or Linear.  ReLU derivative at 0 is 0."""

    KINDS = ("relu", "sigmoid", "linear")

    def __init__(self, kind):
        if kind not in self.KINDS:
            raise ConfigError(f"unknown activation {kind!r}")
        self.kind = kind
        self._cache = None

    def forward(self, x, train=True):
        if self.kind == "relu":
            y = np.maximum(x, 0.0)
        elif self.kind == "sigmoid":
            y = 1.0 / (1.0 + np.exp(-x))
        else:
            y = x
        if train:
            self._cache = y
        return y

    def backward(self, grad):
        y = self._cache
        if self.kind == "relu":
            return grad * (y > 0)
        if self.kind == "sigmoid":
            return grad * y * (1.0 - y)
        return grad

    def spec(self):
        return {"kind": "activation", "activation": self.kind}


class PowerNormalize(Layer):
    """Scale the whole batch so mean symbol power is exactly 1.

    The scale depends on every input entry, so the backward pass carries the
    normalizer's full gradient.  A pinned scale (inference-time comparisons
    across sequence lengths) bypasses both the statistic and its gradient.
    """

    in_channels = 2
    out_channels = 2

    def __init__(self):
        self._cache = None
        self.last_scale = None

    def forward(self, x, train=True, scale=None):
        check_input(x, 2, "PowerNormalize")
        pinned = scale is not None
        alpha = float(scale) if pinned else chan.power_norm_scale(x)
        self.last_scale = alpha
        if train:
            self._cache = (x, alpha, pinned)
        return alpha * x

    def backward(self, grad):
        x, alpha, pinned = self._cache
        if pinned:
            return alpha * grad
        total = x.shape[0] * x.shape[1] / alpha ** 2  # sum of squares
        return alpha * grad - (alpha / total) * x * np.sum(grad * x)

    def spec(self):
        return {"kind": "power_normalize"}


class ChannelLayer(Layer):
    """Non-trainable channel slot: applies a ChannelSpec between TX and RX.

    The spec may be bound at construction or supplied per forward call; noise
    can be disabled (gradient checks) or injected explicitly (common random
    numbers across compared systems).
    """

    in_channels = 2
    out_channels = 2

    def __init__(self, spec: chan.ChannelSpec | None = None):
        self.channel_spec = spec
        self._cache = None

    def forward(self, x, train=True, rng=None, add_noise=True, override=None,
                noise_override=None):
        spec = override if override is not None else self.channel_spec
        if spec is None:
            raise ConfigError("channel slot has no ChannelSpec bound")
        y = chan.apply_channel(x, spec, rng=rng, add_noise=add_noise,
                               noise_override=noise_override)
        if train:
            self._cache = spec
        return y

    def backward(self, grad):
        return chan.apply_channel_backward(grad, self._cache)

    def spec(self):
        d = {"kind": "channel_slot"}
        if self.channel_spec is not None:
            d["channel"] = self.channel_spec.to_dict()
        return d


def layer_from_spec(d: dict) -> Layer:
    """Rebuild a layer from its spec dict (parameters zero until loaded)."""
    kind = d["kind"]
    if kind == "conv1d":
        return Conv1D(d["in_channels"], d["out_channels"], d["kernel_size"],
                      d["stride"], d["padding"])
    if kind == "locally_connected1d":
        return LocallyConnected1D(d["in_channels"], d["out_channels"], d["kernel_size"],
                                  d["input_length"], d["stride"], d["padding"])
    if kind == "positionwise_dense":
        return PositionwiseDense(d["in_channels"], d["out_channels"])
    if kind == "activation":
        return Activation(d["activation"])
    if kind == "power_normalize":
        return PowerNormalize()
    if kind == "channel_slot":
        spec = chan.ChannelSpec.from_dict(d["channel"]) if "channel" in d else None
        return ChannelLayer(spec)
    raise ConfigError(f"unknown layer kind {kind!r}")
