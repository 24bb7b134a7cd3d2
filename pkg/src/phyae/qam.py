"""Gray-coded square QAM: modulation, hard slicing, max-log LLRs, and the
closed-form AWGN BER approximation.

Bit-to-symbol convention: each group of k bits splits into first k/2 bits ->
I axis, last k/2 -> Q axis (MSB first within each half).  Per axis, a
binary-reflected Gray code indexes the amplitude levels
{-(2^(k/2)-1), ..., -1, 1, ..., 2^(k/2)-1}, with the all-zero pattern on the
most negative level.  Points are scaled so the constellation's average
energy is exactly 1 (1/sqrt(42) for 64QAM, 1/sqrt(170) for 256QAM).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .util import bits_to_int, int_to_bits


def qfunc(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class QamSpec:
    """Square 2^k-QAM with per-axis binary-reflected Gray mapping."""

    k: int
    levels: np.ndarray = field(init=False, repr=False, compare=False)
    gray: np.ndarray = field(init=False, repr=False, compare=False)
    inv_gray: np.ndarray = field(init=False, repr=False, compare=False)
    scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k % 2 != 0 or self.k < 2:
            raise ValueError(f"square QAM needs even k >= 2, got {self.k}")
        n = 1 << (self.k // 2)
        levels = 2 * np.arange(n) - (n - 1)  # ascending odd integers
        gray = np.arange(n) ^ (np.arange(n) >> 1)
        inv_gray = np.zeros(n, dtype=np.int64)
        inv_gray[gray] = np.arange(n)
        # mean point energy = 2 * mean(level^2) = 2 (n^2 - 1) / 3
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "gray", gray)
        object.__setattr__(self, "inv_gray", inv_gray)
        object.__setattr__(self, "scale", 1.0 / math.sqrt(2.0 * (n * n - 1) / 3.0))

    @property
    def half(self) -> int:
        return self.k // 2

    @property
    def n_levels(self) -> int:
        return 1 << self.half

    def constellation(self) -> np.ndarray:
        """All 2^k points, indexed by the k-bit label as an integer."""
        labels = np.arange(1 << self.k)
        bits = int_to_bits(labels, self.k)
        return modulate(bits.reshape(-1), self)


def modulate(bits, spec: QamSpec) -> np.ndarray:
    """Bit sequence -> unit-average-energy complex symbols."""
    bits = np.asarray(bits)
    if bits.size % spec.k != 0:
        raise ValueError(f"bit count {bits.size} not divisible by k={spec.k}")
    groups = bits.reshape(-1, spec.k)
    vi = bits_to_int(groups[:, :spec.half])
    vq = bits_to_int(groups[:, spec.half:])
    points = spec.levels[spec.inv_gray[vi]] + 1j * spec.levels[spec.inv_gray[vq]]
    return points * spec.scale


def _slice_axis(values, spec: QamSpec) -> np.ndarray:
    """Nearest-level index per real value; midpoint ties break to the lower level."""
    t = (values / spec.scale + (spec.n_levels - 1)) / 2.0
    idx = np.ceil(t - 0.5)
    return np.clip(idx, 0, spec.n_levels - 1).astype(np.int64)


def demod_hard(symbols, spec: QamSpec) -> np.ndarray:
    """Per-axis nearest-level slicing and inverse Gray map -> bits."""
    symbols = np.asarray(symbols)
    ji = _slice_axis(symbols.real, spec)
    jq = _slice_axis(symbols.imag, spec)
    bi = int_to_bits(spec.gray[ji], spec.half)
    bq = int_to_bits(spec.gray[jq], spec.half)
    return np.concatenate([bi, bq], axis=-1).reshape(-1)


def _axis_llr(values, spec: QamSpec, n0: float) -> np.ndarray:
    """Max-log LLRs for the k/2 bits carried by one axis.

    Returns shape (n_symbols, k/2); positive means bit 0 more likely.
    """
    pts = spec.levels * spec.scale
    d2 = (np.asarray(values)[:, None] - pts[None, :]) ** 2
    level_bits = int_to_bits(spec.gray, spec.half)  # (n_levels, half)
    out = np.empty((d2.shape[0], spec.half))
    for b in range(spec.half):
        ones = level_bits[:, b] == 1
        d_one = d2[:, ones].min(axis=1)
        d_zero = d2[:, ~ones].min(axis=1)
        out[:, b] = (d_one - d_zero) / n0
    return out


def llr(symbols, spec: QamSpec, n0: float) -> np.ndarray:
    """Max-log per-bit LLRs (positive => bit 0 more likely), bit order as
    produced by modulate."""
    if n0 <= 0:
        raise ValueError("LLR computation needs N0 > 0")
    symbols = np.asarray(symbols)
    li = _axis_llr(symbols.real, spec, n0)
    lq = _axis_llr(symbols.imag, spec, n0)
    return np.concatenate([li, lq], axis=1).reshape(-1)


def awgn_ber_theory(spec: QamSpec, snr_db: float) -> float:
    """Gray-coded square-QAM BER approximation on AWGN at Es/N0 = snr_db."""
    gamma_s = 10.0 ** (snr_db / 10.0)
    m = 1 << spec.k
    return (4.0 / spec.k) * (1.0 - 1.0 / math.sqrt(m)) * qfunc(
        math.sqrt(3.0 * gamma_s / (m - 1)))


def snr_for_theory_ber(spec: QamSpec, target_ber: float,
                       lo: float = -10.0, hi: float = 60.0) -> float:
    """Invert awgn_ber_theory by bisection (it is monotone decreasing)."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if awgn_ber_theory(spec, mid) > target_ber:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
