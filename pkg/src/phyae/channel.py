"""Channel models: power normalization, multipath convolution, subcarrier fading,
AWGN and bursty noise, and tap perturbation.

Conventions
-----------
Complex signals travel through the network as (B, L, 2) float64 tensors with
channel 0 = real part and channel 1 = imaginary part; the helpers in
:mod:`phyae.util` convert to/from (B, L) complex arrays.

SNR is Es/N0 per complex symbol with the average symbol energy held at 1 by
power normalization.  N0 = 10^(-snr_db/10) and the per-real-dimension noise
standard deviation is sqrt(N0/2), applied independently to the real and
imaginary components.

The time-domain channel is causal and length-preserving:

    y_i = sum_n h_n x_{i-n} + n_i,   x_j = 0 for j < 0,

with true complex multiplication (real = Re h Re x - Im h Im x, imag =
Re h Im x + Im h Re x).  Its adjoint (used by backprop) is correlation with
the conjugated taps; the taps themselves are not trainable.
"""

from dataclasses import dataclass, field, replace

import json

import numpy as np

from .errors import ConfigError
from .util import from_complex, to_complex


def snr_to_noise_sigma(snr_db: float) -> float:
    """Per-real-dimension noise std for unit symbol energy: sqrt(N0/2)."""
    n0 = 10.0 ** (-snr_db / 10.0)
    return float(np.sqrt(n0 / 2.0))


@dataclass
class NoiseModel:
    """AWGN or bursty (Gaussian mixture) noise at a given Es/N0."""

    kind: str = "awgn"  # "awgn" | "bursty"
    snr_db: float = 12.0
    burst_probability: float = 0.05
    burst_sigma_multiplier: float = 5.0

    def __post_init__(self):
        if self.kind not in ("awgn", "bursty"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.kind == "bursty":
            if not 0.0 <= self.burst_probability <= 1.0:
                raise ConfigError("burst_probability must be in [0, 1]")
            if self.burst_sigma_multiplier <= 1.0:
                raise ConfigError("burst_sigma_multiplier must be > 1")

    def sigma(self) -> float:
        return snr_to_noise_sigma(self.snr_db)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "snr_db": self.snr_db}
        if self.kind == "bursty":
            d["burst_probability"] = self.burst_probability
            d["burst_sigma_multiplier"] = self.burst_sigma_multiplier
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(
            kind=d.get("kind", "awgn"),
            snr_db=float(d.get("snr_db", 12.0)),
            burst_probability=float(d.get("burst_probability", 0.05)),
            burst_sigma_multiplier=float(d.get("burst_sigma_multiplier", 5.0)),
        )


@dataclass
class ChannelSpec:
    """Fully determines the channel layer's behavior.

    Time domain: `taps` is the dense complex impulse response h_0..h_{Lh-1}
    (zeros at delays without a path).  Frequency domain: `gains` is the
    per-subcarrier complex gain H_0..H_{M-1}.
    """

    domain: str = "time"  # "time" | "frequency"
    taps: np.ndarray | None = None
    gains: np.ndarray | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int | None = None

    def __post_init__(self):
        if self.domain not in ("time", "frequency"):
            raise ConfigError(f"unknown channel domain {self.domain!r}")
        if self.domain == "time":
            if self.taps is None:
                raise ConfigError("time-domain channel requires taps")
            self.taps = np.asarray(self.taps, dtype=np.complex128)
            if self.taps.ndim != 1 or self.taps.size < 1:
                raise ConfigError("taps must be a non-empty 1-D complex array")
            if not np.any(np.abs(self.taps) > 0):
                raise ConfigError("all channel taps are zero")
        else:
            if self.gains is None:
                raise ConfigError("frequency-domain channel requires gains")
            self.gains = np.asarray(self.gains, dtype=np.complex128)
            if self.gains.ndim != 1 or self.gains.size < 1:
                raise ConfigError("gains must be a non-empty 1-D complex array")

    def with_noise(self, **kwargs) -> "ChannelSpec":
        return replace(self, noise=replace(self.noise, **kwargs))

    def with_taps(self, taps) -> "ChannelSpec":
        return replace(self, taps=np.asarray(taps, dtype=np.complex128))

    def to_dict(self) -> dict:
        d = {"domain": self.domain, "noise": self.noise.to_dict()}
        if self.seed is not None:
            d["seed"] = self.seed
        if self.domain == "time":
            d["taps"] = taps_to_triples(self.taps)
        else:
            d["gains"] = [[float(g.real), float(g.imag)] for g in self.gains]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        noise = NoiseModel.from_dict(d.get("noise", {}))
        seed = d.get("seed")
        domain = d.get("domain", "time")
        if domain == "time":
            return cls(domain="time", taps=taps_from_triples(d["taps"]), noise=noise, seed=seed)
        if d.get("fft_of_taps"):
            from .spectral import freq_response  # deferred: avoids import at module load

            n = int(d["n_subcarriers"])
            gains = freq_response(taps_from_triples(d["taps"]), n)
        else:
            gains = np.array([complex(re, im) for re, im in d["gains"]])
        return cls(domain="frequency", gains=gains, noise=noise, seed=seed)


def taps_to_triples(taps: np.ndarray) -> list:
    """Dense impulse response -> (delay, real, imag) triples for nonzero taps."""
    return [
        [int(d), float(h.real), float(h.imag)]
        for d, h in enumerate(taps)
        if abs(h) > 0
    ]


def taps_from_triples(triples) -> np.ndarray:
    """(delay, real, imag) triples -> dense complex impulse response."""
    if not triples:
        raise ConfigError("empty tap list")
    delays = [int(t[0]) for t in triples]
    if min(delays) < 0:
        raise ConfigError("tap delays must be >= 0")
    if len(set(delays)) != len(delays):
        raise ConfigError("duplicate tap delay")
    taps = np.zeros(max(delays) + 1, dtype=np.complex128)
    for d, re, im in triples:
        taps[int(d)] = complex(re, im)
    return taps


def load_channel(path) -> ChannelSpec:
    with open(path) as f:
        return ChannelSpec.from_dict(json.load(f))


def save_channel(spec: ChannelSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(spec.to_dict(), f, indent=2)
        f.write("\n")


# Shipped default channels.  The multipath profiles are representative config
# inputs, not reproductions of any measured channel.
def channel_a_taps() -> np.ndarray:
    """3-path channel, delays 0,1,2."""
    return np.array([1.0, 0.6 * np.exp(1j * 0.7), 0.3 * np.exp(1j * 2.1)])


def channel_b_taps() -> np.ndarray:
    """4-path channel with longer memory: delays 0,1,2,5 (zeros between)."""
    h = np.zeros(6, dtype=np.complex128)
    h[0] = 1.0
    h[1] = 0.5 * np.exp(1j * 1.0)
    h[2] = 0.4 * np.exp(1j * 2.5)
    h[5] = 0.3 * np.exp(1j * 0.3)
    return h


# ---------------------------------------------------------------------------
# Noise sampling
# ---------------------------------------------------------------------------

def sample_awgn(shape, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. zero-mean Gaussian with std `sigma` per entry."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.zeros(shape)
    return rng.normal(0.0, sigma, size=shape)

def sample_bursty(shape, sigma: float, p: float, rho: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Gaussian mixture noise: with probability p (per complex symbol) both
    real components use std rho*sigma, otherwise std sigma.

    `shape` must end in 2 (real/imag).  p=0 falls back to sample_awgn so the
    draw sequence matches it exactly.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("burst probability must be in [0, 1]")
    if shape[-1] != 2:
        raise ValueError("bursty noise needs a (..., 2) real/imag shape")
    if p == 0.0:
        return sample_awgn(shape, sigma, rng)
    burst = rng.random(shape[:-1]) < p
    scale = np.where(burst, rho * sigma, sigma)[..., None]
    return rng.normal(0.0, 1.0, size=shape) * scale


def sample_noise(spec: ChannelSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Noise tensor per the spec's noise model, in (..., 2) layout."""
    nm = spec.noise
    if nm.kind == "awgn":
        return sample_awgn(shape, nm.sigma(), rng)
    return sample_bursty(shape, nm.sigma(), nm.burst_probability,
                         nm.burst_sigma_multiplier, rng)


def perturb_taps(taps: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Gaussian(0, std^2) to the real and imaginary part of every tap."""
    if std < 0:
        raise ValueError("std must be >= 0")
    taps = np.asarray(taps, dtype=np.complex128)
    if std == 0:
        return taps.copy()
    return taps + rng.normal(0.0, std, taps.shape) + 1j * rng.normal(0.0, std, taps.shape)


# ---------------------------------------------------------------------------
# Power normalization
# ---------------------------------------------------------------------------

def power_norm_scale(x: np.ndarray) -> float:
    """Scale alpha with (1/(LB)) * sum |alpha x|^2 = 1 over the whole batch."""
    total = float(np.sum(x * x))
    if total == 0.0:
        raise ValueError("cannot power-normalize an all-zero signal")
    n_symbols = x.shape[0] * x.shape[1]
    return float(np.sqrt(n_symbols / total))


def normalize_power(x: np.ndarray) -> np.ndarray:
    """Scale a (B, L, 2) signal so batch-mean symbol power is exactly 1."""
    return x * power_norm_scale(x)


# ---------------------------------------------------------------------------
# Channel application (linear part + adjoint, then noise)
# ---------------------------------------------------------------------------

def convolve_taps(z: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Causal same-length complex convolution of (B, L) rows with the taps."""
    b, length = z.shape
    out = np.zeros_like(z)
    for d, h in enumerate(taps):
        if h == 0 or d >= length:
            continue
        if d == 0:
            out += h * z
        else:
            out[:, d:] += h * z[:, :length - d]
    return out


def convolve_taps_adjoint(g: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Adjoint of convolve_taps: correlation with conjugated taps."""
    b, length = g.shape
    out = np.zeros_like(g)
    for d, h in enumerate(taps):
        if h == 0 or d >= length:
            continue
        if d == 0:
            out += np.conj(h) * g
        else:
            out[:, :length - d] += np.conj(h) * g[:, d:]
    return out


def _resolve_rng(spec: ChannelSpec, rng) -> np.random.Generator:
    if rng is not None:
        return rng
    if spec.seed is not None:
        return np.random.default_rng(spec.seed)
    raise ValueError("channel noise requires an rng (or a seeded ChannelSpec)")


def apply_time_channel(x: np.ndarray, spec: ChannelSpec, rng=None,
                       add_noise: bool = True,
                       noise_override: np.ndarray | None = None) -> np.ndarray:
    """Multipath convolution plus noise on a (B, L, 2) signal."""
    if spec.domain != "time":
        raise ValueError(f"apply_time_channel needs a time-domain spec, got {spec.domain!r}")
    y = from_complex(convolve_taps(to_complex(x), spec.taps))
    if noise_override is not None:
        y += noise_override
    elif add_noise and spec.noise.sigma() > 0:
        y += sample_noise(spec, y.shape, _resolve_rng(spec, rng))
    return y


def apply_time_channel_backward(grad: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    return from_complex(convolve_taps_adjoint(to_complex(grad), spec.taps))


def apply_freq_channel(x: np.ndarray, spec: ChannelSpec, rng=None,
                       add_noise: bool = True,
                       noise_override: np.ndarray | None = None) -> np.ndarray:
    """Independent per-subcarrier complex gain plus noise on a (B, M, 2) signal."""
    if spec.domain != "frequency":
        raise ValueError(f"apply_freq_channel needs a frequency-domain spec, got {spec.domain!r}")
    if x.shape[1] != spec.gains.size:
        raise ValueError(
            f"signal length {x.shape[1]} != number of subcarrier gains {spec.gains.size}")
    y = from_complex(to_complex(x) * spec.gains[None, :])
    if noise_override is not None:
        y += noise_override
    elif add_noise and spec.noise.sigma() > 0:
        y += sample_noise(spec, y.shape, _resolve_rng(spec, rng))
    return y


def apply_freq_channel_backward(grad: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    return from_complex(to_complex(grad) * np.conj(spec.gains)[None, :])


def apply_channel(x: np.ndarray, spec: ChannelSpec, rng=None, add_noise=True,
                  noise_override=None) -> np.ndarray:
    if spec.domain == "time":
        return apply_time_channel(x, spec, rng, add_noise, noise_override)
    return apply_freq_channel(x, spec, rng, add_noise, noise_override)


def apply_channel_backward(grad: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    if spec.domain == "time":
        return apply_time_channel_backward(grad, spec)
    return apply_freq_channel_backward(grad, spec)
