"""Autoencoder transceivers: architecture construction, dataset generation,
training, inference, constellation extraction, and checkpoint files.

Layout convention: a training example is k*M i.i.d. bits fed as a (B, k*M, 1)
tensor.  The first TX layer compresses length k*M to M with stride k, so
symbol m is produced from bit window [m*k, (m+1)*k) and the RX output at
position m carries the k probabilities for those bits.
"""

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import ChannelSpec
from .errors import ConfigError, FormatError, TrainingDiverged
from .layers import (Activation, ChannelLayer, Conv1D, LocallyConnected1D,
                     PositionwiseDense, PowerNormalize)
from .network import Adam, Network, bce_loss, load_network, save_network
from .util import random_bits, rng_stream, to_complex

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "phyae-checkpoint"
_DATASET_STREAMS = {"train": 0, "val": 1, "test": 2}


@dataclass
class ArchConfig:
    """Network shape: k bits/symbol, M symbols per training sequence,
    hidden width, and the channel-facing kernel spans."""

    k: int = 6
    m_symbols: int = 400
    hidden: int = 32
    tx_kernel: int = 1
    rx_kernel: int = 9
    domain: str = "time"

    def __post_init__(self):
        if self.k < 1 or self.hidden < 1 or self.tx_kernel < 1 or self.rx_kernel < 1:
            raise ConfigError("architecture sizes must be >= 1")
        if self.m_symbols < self.rx_kernel:
            raise ConfigError(
                f"M={self.m_symbols} shorter than the RX kernel {self.rx_kernel}")
        if self.domain not in ("time", "frequency"):
            raise ConfigError(f"unknown domain {self.domain!r}")


@dataclass
class TrainConfig:
    n_train: int = 30000
    n_val: int = 5000
    n_test: int = 10000
    batch: int = 32
    lr: float = 0.001
    train_snr_db: float = 12.0
    epochs: int = 40
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("n_train", "n_val", "n_test", "batch", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")


def _tx_layers(arch: ArchConfig, rng, local: bool):
    f = arch.hidden
    mid = (LocallyConnected1D(f, f, 5, arch.m_symbols, padding=2, rng=rng)
           if local else Conv1D(f, f, 5, stride=1, padding=2, rng=rng))
    if arch.tx_kernel == 1:
        head = PositionwiseDense(f, 2, rng=rng)
    else:
        head = Conv1D(f, 2, arch.tx_kernel, stride=1,
                      padding=arch.tx_kernel // 2, rng=rng)
    return [
        Conv1D(1, f, arch.k, stride=arch.k, padding=0, rng=rng),
        Activation("relu"),
        PositionwiseDense(f, f, rng=rng),
        Activation("relu"),
        mid,
        Activation("relu"),
        head,
        PowerNormalize(),
    ]


def _rx_layers(arch: ArchConfig, rng, local: bool):
    f = arch.hidden
    front = (LocallyConnected1D(2, f, arch.rx_kernel, arch.m_symbols,
                                padding=arch.rx_kernel // 2, rng=rng)
             if local else Conv1D(2, f, arch.rx_kernel, stride=1,
                                  padding=arch.rx_kernel // 2, rng=rng))
    return [
        front,
        Activation("relu"),
        Conv1D(f, f, 5, stride=1, padding=2, rng=rng),
        Activation("relu"),
        PositionwiseDense(f, arch.k, rng=rng),
        Activation("sigmoid"),
    ]


def _build(arch: ArchConfig, seed: int, local: bool) -> Network:
    rng = rng_stream(seed, "init")
    layers = (_tx_layers(arch, rng, local) + [ChannelLayer(None)]
              + _rx_layers(arch, rng, local))
    net = Network(layers, input_channels=1)
    net.validate_length(arch.k * arch.m_symbols)
    net.arch = arch
    return net


def build_time_model(arch: ArchConfig, seed: int = 0) -> Network:
    """Fully convolutional TX/RX around a time-domain channel slot; runs at
    any sequence length."""
    if arch.domain != "time":
        raise ConfigError("build_time_model needs arch.domain == 'time'")
    return _build(arch, seed, local=False)


def build_freq_model(arch: ArchConfig, seed: int = 0) -> Network:
    """Same skeleton with the TX kernel-5 stage and the RX front replaced by
    locally connected layers bound to M subcarriers."""
    if arch.domain != "frequency":
        raise ConfigError("build_freq_model needs arch.domain == 'frequency'")
    return _build(arch, seed, local=True)


def build_model(arch: ArchConfig, seed: int = 0) -> Network:
    return (build_time_model(arch, seed) if arch.domain == "time"
            else build_freq_model(arch, seed))


def gen_dataset(n_sequences: int, k: int, m_symbols: int, seed: int,
                split: str = "train") -> np.ndarray:
    """(n, k*M) i.i.d. uniform bits; train/val/test use disjoint RNG streams."""
    if split not in _DATASET_STREAMS:
        raise ValueError(f"unknown split {split!r}")
    rng = rng_stream(seed, "dataset", _DATASET_STREAMS[split])
    return random_bits(rng, (n_sequences, k * m_symbols))


def bits_to_input(bits: np.ndarray) -> np.ndarray:
    return np.asarray(bits, dtype=np.float64)[:, :, None]


def bits_to_target(bits: np.ndarray, k: int) -> np.ndarray:
    return np.asarray(bits, dtype=np.float64).reshape(bits.shape[0], -1, k)


@dataclass
class Checkpoint:
    arch: ArchConfig
    train_cfg: TrainConfig
    channel: ChannelSpec | None
    network: Network
    history: dict = field(default_factory=dict)

    def save(self, path):
        extra = {
            "kind": CHECKPOINT_KIND,
            "arch": asdict(self.arch),
            "train_cfg": asdict(self.train_cfg),
            "channel": self.channel.to_dict() if self.channel else None,
            "history": self.history,
        }
        save_network(path, self.network, extra)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        network, extra = load_network(path)
        if extra.get("kind") != CHECKPOINT_KIND:
            raise FormatError("network file is not an autoencoder checkpoint")
        arch = ArchConfig(**extra["arch"])
        network.arch = arch
        channel = (ChannelSpec.from_dict(extra["channel"])
                   if extra.get("channel") else None)
        return cls(arch=arch, train_cfg=TrainConfig(**extra["train_cfg"]),
                   channel=channel, network=network, history=extra["history"])


def _epoch_loss(model, channel, bits, k, batch, rng):
    """Mean BCE over a dataset without updating parameters."""
    total = 0.0
    count = 0
    for start in range(0, bits.shape[0], batch):
        chunk = bits[start:start + batch]
        y = model.forward(bits_to_input(chunk), rng=rng, add_noise=True,
                          channel=channel, train=False)
        loss, _ = bce_loss(y, bits_to_target(chunk, k))
        total += loss * chunk.shape[0]
        count += chunk.shape[0]
    return total / count


def train(model: Network, channel: ChannelSpec, cfg: TrainConfig,
          log_file=None) -> Checkpoint:
    """Mini-batch Adam on BCE with fresh channel noise every batch.

    Deterministic given (seed, config, channel): data, shuffling, and noise
    all derive from cfg.seed.  Early-stops on validation loss (restoring the
    best parameters) after cfg.patience epochs without improvement.
    """
    arch = getattr(model, "arch", None)
    if arch is None:
        raise ConfigError("model was not built by build_time_model/build_freq_model")
    if channel.domain != arch.domain:
        raise ConfigError(
            f"channel domain {channel.domain!r} != architecture domain {arch.domain!r}")
    channel = channel.with_noise(snr_db=cfg.train_snr_db)

    train_bits = gen_dataset(cfg.n_train, arch.k, arch.m_symbols, cfg.seed, "train")
    val_bits = gen_dataset(cfg.n_val, arch.k, arch.m_symbols, cfg.seed, "val")
    shuffle_rng = rng_stream(cfg.seed, "shuffle")
    noise_rng = rng_stream(cfg.seed, "train-noise")
    optimizer = Adam(model, lr=cfg.lr)

    def emit(line):
        logger.info(line)
        if log_file is not None:
            log_file.write(line + "\n")
            log_file.flush()

    history = {"train_loss": [], "val_loss": [], "seconds": []}
    best_val = np.inf
    best_params = None
    stale = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(cfg.n_train)
        running = 0.0
        seen = 0
        for bi, start in enumerate(range(0, cfg.n_train, cfg.batch)):
            chunk = train_bits[order[start:start + cfg.batch]]
            x = bits_to_input(chunk)
            target = bits_to_target(chunk, arch.k)
            y = model.forward(x, rng=noise_rng, add_noise=True, channel=channel)
            loss, grad = bce_loss(y, target)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, bi, loss)
            model.backward(grad)
            optimizer.step()
            running += loss * chunk.shape[0]
            seen += chunk.shape[0]
        val_rng = rng_stream(cfg.seed, "val-noise", epoch)
        val_loss = _epoch_loss(model, channel, val_bits, arch.k, cfg.batch, val_rng)
        seconds = time.perf_counter() - t0
        train_loss = running / seen
        history["train_loss"].append(train_loss)
        history["val_loss"].append(val_loss)
        history["seconds"].append(seconds)
        emit(f"epoch {epoch} train_loss {train_loss:.6f} val_loss {val_loss:.6f} "
             f"wall_seconds {seconds:.2f}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = model.copy_params()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                emit(f"early stop at epoch {epoch} (no improvement for {stale} epochs)")
                break
    if best_params is not None:
        model.set_params(best_params)
    return Checkpoint(arch=arch, train_cfg=cfg, channel=channel, network=model,
                      history=history)


def infer_bits(ckpt: Checkpoint, bits: np.ndarray, channel: ChannelSpec | None = None,
               rng=None, add_noise: bool = True, norm_scale=None,
               noise_override=None):
    """Full TX -> channel -> RX pass on (B, k*M_run) bits.

    Returns (probabilities, hard bits), both (B, k*M_run); hard decision is
    probability >= 0.5.  Time-domain models accept any M_run >= rx_kernel;
    frequency-domain models are bound to the trained M.
    """
    arch = ckpt.arch
    bits = np.atleast_2d(bits)
    if bits.shape[1] % arch.k != 0:
        raise ValueError(f"bit count {bits.shape[1]} not divisible by k={arch.k}")
    m_run = bits.shape[1] // arch.k
    if arch.domain == "frequency" and m_run != arch.m_symbols:
        raise ValueError(
            f"frequency-domain model is bound to M={arch.m_symbols}, got M_run={m_run}")
    if m_run < arch.rx_kernel:
        raise ValueError(f"M_run={m_run} shorter than RX kernel {arch.rx_kernel}")
    spec = channel if channel is not None else ckpt.channel
    if spec is None:
        raise ConfigError("no channel bound to checkpoint and none supplied")
    if spec.domain != arch.domain:
        raise ConfigError(
            f"channel domain {spec.domain!r} != architecture domain {arch.domain!r}")
    y = ckpt.network.forward(bits_to_input(bits), rng=rng, add_noise=add_noise,
                             channel=spec, norm_scale=norm_scale,
                             noise_override=noise_override, train=False)
    probs = y.reshape(bits.shape[0], -1)
    hard = (probs >= 0.5).astype(np.uint8)
    return probs, hard


def extract_constellation(ckpt: Checkpoint, n_symbols: int = 40000,
                          seed: int = 0):
    """Run the TX on random bits and collect post-normalization symbols.

    Returns (complex points, stats) where stats holds the mean power and a
    16-bin radial histogram.  The whole collection is normalized as one
    batch, so the mean power is exactly 1.
    """
    arch = ckpt.arch
    if arch.domain == "frequency":
        if n_symbols % arch.m_symbols != 0:
            raise ValueError(
                f"n_symbols must be a multiple of M={arch.m_symbols} for "
                f"frequency-domain models")
        shape = (n_symbols // arch.m_symbols, arch.k * arch.m_symbols)
    else:
        shape = (1, arch.k * n_symbols)
    bits = random_bits(rng_stream(seed, "constellation"), shape)
    tx = ckpt.network.tx_network()
    out = tx.forward(bits_to_input(bits), train=False)
    points = to_complex(out).reshape(-1)
    radii = np.abs(points)
    hist, edges = np.histogram(radii, bins=16)
    stats = {
        "mean_power": float(np.mean(radii ** 2)),
        "radial_hist": hist.tolist(),
        "radial_edges": edges.tolist(),
    }
    return points, stats
