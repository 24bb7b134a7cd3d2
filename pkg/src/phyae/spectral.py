"""Radix-2 FFT and channel frequency response.

The transform is the unnormalized DFT; the inverse applies 1/N.  Lengths
must be powers of two.  Work is O(n log n): log2(n) butterfly stages, each a
vectorized pass over the full array (batched inputs transform along the last
axis in one shot).
"""

import numpy as np


def _check_pow2(n: int):
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"length {n} is not a power of 2")


def bit_reverse_indices(n: int) -> np.ndarray:
    _check_pow2(n)
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def fft(x, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey DFT along the last axis."""
    x = np.asarray(x)
    n = x.shape[-1]
    _check_pow2(n)
    y = np.ascontiguousarray(x[..., bit_reverse_indices(n)], dtype=np.complex128)
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        twiddle = np.exp(sign * 2j * np.pi * np.arange(m // 2) / m)
        blocks = y.reshape(y.shape[:-1] + (n // m, m))
        even = blocks[..., :m // 2]
        odd = blocks[..., m // 2:] * twiddle
        blocks[..., :m // 2], blocks[..., m // 2:] = even + odd, even - odd
        m *= 2
    if inverse:
        y /= n
    return y


def ifft(x) -> np.ndarray:
    return fft(x, inverse=True)


def freq_response(taps, n: int) -> np.ndarray:
    """Per-subcarrier gains H_0..H_{n-1}: DFT of the zero-padded impulse
    response (taps at their delay indices)."""
    taps = np.asarray(taps, dtype=np.complex128)
    _check_pow2(n)
    if taps.size > n:
        raise ValueError(f"tap span {taps.size} exceeds n={n} subcarriers")
    padded = np.zeros(n, dtype=np.complex128)
    padded[:taps.size] = taps
    return fft(padded)
