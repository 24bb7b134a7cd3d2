"""Sequential network container, BCE loss, Adam, gradient checking, and the
binary network file format.

The graph is a plain ordered list of layers with at most one channel slot.
Forward/backward are single-threaded per call; independent Network instances
can run concurrently.
"""

import io
import json

import numpy as np

from .channel import ChannelSpec
from .errors import ConfigError, FormatError
from .layers import (Activation, ChannelLayer, Layer, PowerNormalize,
                     layer_from_spec)

FORMAT_VERSION = 1
_MAGIC = b"phyae-net"


class Network:
    """Ordered layer chain with a designated (optional) channel slot."""

    def __init__(self, layers: list, input_channels: int = 1):
        self.layers = list(layers)
        self.input_channels = input_channels
        slots = [i for i, l in enumerate(self.layers) if isinstance(l, ChannelLayer)]
        if len(slots) > 1:
            raise ConfigError(f"graph has {len(slots)} channel slots; at most one allowed")
        self.channel_index = slots[0] if slots else None
        self._validate_channels()

    def _validate_channels(self):
        current = self.input_channels
        for i, layer in enumerate(self.layers):
            if layer.in_channels is not None and layer.in_channels != current:
                raise ConfigError(
                    f"layer {i} ({type(layer).__name__}) expects {layer.in_channels} "
                    f"channels but receives {current}")
            if layer.out_channels is not None:
                current = layer.out_channels
        self.output_channels = current

    def validate_length(self, length: int) -> int:
        """Walk the output-length formula through every layer; raises if any
        layer would produce an empty output for this input length."""
        for layer in self.layers:
            length = layer.out_length(length)
        return length

    def forward(self, x, rng=None, add_noise=True, channel=None, norm_scale=None,
                noise_override=None, train=True):
        for layer in self.layers:
            if isinstance(layer, ChannelLayer):
                x = layer.forward(x, train=train, rng=rng, add_noise=add_noise,
                                  override=channel, noise_override=noise_override)
            elif isinstance(layer, PowerNormalize):
                x = layer.forward(x, train=train, scale=norm_scale)
            else:
                x = layer.forward(x, train=train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grads(self):
        for layer in self.layers:
            for g in layer.grads().values():
                g[...] = 0.0

    def parameters(self):
        """Deterministically ordered (layer_index, name, param, grad) tuples."""
        out = []
        for i, layer in enumerate(self.layers):
            p, g = layer.params(), layer.grads()
            for name in sorted(p):
                out.append((i, name, p[name], g[name]))
        return out

    def num_params(self) -> int:
        return sum(p.size for _, _, p, _ in self.parameters())

    def tx_network(self) -> "Network":
        """Layers before the channel slot (shares parameter arrays)."""
        if self.channel_index is None:
            raise ConfigError("graph has no channel slot")
        return Network(self.layers[:self.channel_index], self.input_channels)

    def rx_network(self) -> "Network":
        """Layers after the channel slot (shares parameter arrays)."""
        if self.channel_index is None:
            raise ConfigError("graph has no channel slot")
        return Network(self.layers[self.channel_index + 1:], 2)

    def copy_params(self) -> list:
        return [p.copy() for _, _, p, _ in self.parameters()]

    def set_params(self, snapshot: list):
        params = self.parameters()
        if len(snapshot) != len(params):
            raise ValueError("parameter snapshot does not match network")
        for (_, _, p, _), src in zip(params, snapshot):
            p[...] = src


def bce_loss(pred, target):
    """Mean binary cross-entropy and its gradient w.r.t. pred.

    Predictions are clamped to [1e-12, 1 - 1e-12] before the log; the
    gradient uses the same clamp.
    """
    p = np.clip(pred, 1e-12, 1.0 - 1e-12)
    t = np.asarray(target, dtype=np.float64)
    loss = float(-np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p)))
    grad = (p - t) / (p * (1.0 - p)) / p.size
    return loss, grad


class Adam:
    """Bias-corrected Adam over a network's parameters; zeroes gradients
    after each step."""

    def __init__(self, network: Network, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.network = network
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._slots = [(p, g, np.zeros_like(p), np.zeros_like(p))
                       for _, _, p, g in network.parameters()]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in self._slots:
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            g[...] = 0.0


def finite_difference_check(network: Network, x, target, step=1e-5,
                            freeze_noise=True) -> float:
    """Max relative error between analytic parameter gradients and central
    finite differences of the BCE loss.

    The forward pass must be deterministic: channel noise is frozen at zero
    unless the graph is noise-free.  Intended for small probe graphs.
    """
    if not freeze_noise and network.channel_index is not None:
        slot = network.layers[network.channel_index]
        if slot.channel_spec is not None and slot.channel_spec.noise.sigma() > 0:
            raise ConfigError("gradient check rejected: graph forward is stochastic "
                              "(channel noise active); freeze it first")

    def loss_of(inp):
        y = network.forward(inp, add_noise=False, train=False)
        return bce_loss(y, target)[0]

    network.zero_grads()
    out = network.forward(x, add_noise=False, train=True)
    _, dl = bce_loss(out, target)
    network.backward(dl)

    worst = 0.0
    for _, _, p, g in network.parameters():
        flat_p = p.ravel()
        flat_g = g.ravel()
        for idx in range(flat_p.size):
            orig = flat_p[idx]
            flat_p[idx] = orig + step
            up = loss_of(x)
            flat_p[idx] = orig - step
            down = loss_of(x)
            flat_p[idx] = orig
            numeric = (up - down) / (2.0 * step)
            rel = abs(flat_g[idx] - numeric) / (abs(numeric) + 1e-8)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Binary network format: text header (format version, JSON layer specs and
# array manifest) followed by little-endian float64 arrays in layer order.
# ---------------------------------------------------------------------------

def _array_manifest(network: Network):
    return [{"layer": i, "name": name, "shape": list(p.shape)}
            for i, name, p, _ in network.parameters()]


def save_network(f, network: Network, extra: dict | None = None):
    """Write the network to a binary file object (or path)."""
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, "wb") as fh:
            save_network(fh, network, extra)
        return
    header = {
        "input_channels": network.input_channels,
        "layers": [l.spec() for l in network.layers],
        "arrays": _array_manifest(network),
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    f.write(_MAGIC + b" format-version %d\n" % FORMAT_VERSION)
    f.write(b"header-bytes %d\n" % len(blob))
    f.write(blob)
    for _, _, p, _ in network.parameters():
        f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_network(f):
    """Read a network written by save_network; returns (Network, extra)."""
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, "rb") as fh:
            return load_network(fh)
    magic = f.readline()
    if not magic.startswith(_MAGIC + b" format-version "):
        raise FormatError("not a phyae network file (bad magic)")
    try:
        version = int(magic.split()[-1])
    except ValueError:
        raise FormatError("unreadable format version") from None
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version} (want {FORMAT_VERSION})")
    size_line = f.readline()
    if not size_line.startswith(b"header-bytes "):
        raise FormatError("missing header size line")
    n = int(size_line.split()[-1])
    blob = f.read(n)
    if len(blob) != n:
        raise FormatError("truncated header")
    header = json.loads(blob)
    layers = [layer_from_spec(d) for d in header["layers"]]
    network = Network(layers, input_channels=header["input_channels"])
    params = network.parameters()
    manifest = header["arrays"]
    if len(manifest) != len(params):
        raise FormatError("array manifest does not match layer specs")
    for entry, (i, name, p, _) in zip(manifest, params):
        if entry["layer"] != i or entry["name"] != name or tuple(entry["shape"]) != p.shape:
            raise FormatError(f"manifest mismatch at layer {i} param {name!r}")
        raw = f.read(p.size * 8)
        if len(raw) != p.size * 8:
            raise FormatError(f"truncated weights at layer {i} param {name!r}")
        p[...] = np.frombuffer(raw, dtype="<f8").reshape(p.shape)
    if f.read(1):
        raise FormatError("trailing bytes after weight arrays")
    return network, header["extra"]


def network_to_bytes(network: Network, extra=None) -> bytes:
    buf = io.BytesIO()
    save_network(buf, network, extra)
    return buf.getvalue()
