"""ZF and MMSE equalization, plus the cyclic-prefixed single-carrier
frequency-domain pipeline used by the QAM baseline on multipath channels.

Per-bin rules (gain H, noise power N0):
    ZF:    x_hat = y / H, with |H| < 1e-12 treated as an erasure (output 0)
    MMSE:  x_hat = conj(H) y / (|H|^2 + N0)

For a time-domain channel the baseline sends symbols in blocks of n_fft with
a cyclic prefix at least as long as the channel memory, which turns the
linear convolution into a circular one per block; equalization then runs
fft -> per-bin rule -> ifft.
"""

import numpy as np

from .spectral import fft, freq_response, ifft

ZF_ERASURE_THRESHOLD = 1e-12


def equalize(y, gains, kind: str, n0: float = 0.0) -> np.ndarray:
    """Per-bin ZF or MMSE on aligned arrays (last axis = bins)."""
    y = np.asarray(y, dtype=np.complex128)
    gains = np.asarray(gains, dtype=np.complex128)
    if y.shape[-1] != gains.shape[-1]:
        raise ValueError(f"bin count mismatch: signal {y.shape[-1]}, gains {gains.shape[-1]}")
    if kind == "zf":
        alive = np.abs(gains) >= ZF_ERASURE_THRESHOLD
        safe = np.where(alive, gains, 1.0)
        return np.where(alive, y / safe, 0.0)
    if kind == "mmse":
        if n0 < 0:
            raise ValueError("N0 must be >= 0")
        return np.conj(gains) * y / (np.abs(gains) ** 2 + n0)
    raise ValueError(f"unknown equalizer kind {kind!r}")


def add_cyclic_prefix(symbols, n_fft: int, cp_len: int) -> np.ndarray:
    """(n_blocks*n_fft,) symbols -> serial stream with per-block prefixes."""
    symbols = np.asarray(symbols)
    if symbols.size % n_fft != 0:
        raise ValueError(f"symbol count {symbols.size} not divisible by n_fft={n_fft}")
    blocks = symbols.reshape(-1, n_fft)
    with_cp = np.concatenate([blocks[:, n_fft - cp_len:], blocks], axis=1)
    return with_cp.reshape(-1)


def strip_cyclic_prefix(stream, n_fft: int, cp_len: int) -> np.ndarray:
    stream = np.asarray(stream)
    if stream.size % (n_fft + cp_len) != 0:
        raise ValueError("stream length not a whole number of prefixed blocks")
    return stream.reshape(-1, n_fft + cp_len)[:, cp_len:]


def fde_receive(stream, taps, n_fft: int, cp_len: int, kind: str,
                n0: float = 0.0) -> np.ndarray:
    """Cyclic-prefixed blocks -> equalized symbols (flattened).

    cp_len must be >= len(taps) - 1 so each block sees a circular channel.
    """
    taps = np.asarray(taps, dtype=np.complex128)
    if cp_len < taps.size - 1:
        raise ValueError(f"cp_len={cp_len} shorter than channel memory {taps.size - 1}")
    blocks = strip_cyclic_prefix(stream, n_fft, cp_len)
    gains = freq_response(taps, n_fft)
    equalized = ifft(equalize(fft(blocks), gains[None, :], kind, n0))
    return equalized.reshape(-1)
