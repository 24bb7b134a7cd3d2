"""Small shared helpers: seeded RNG streams, complex/real packing, bit arrays."""

import zlib

import numpy as np


def rng_stream(seed: int, *path) -> np.random.Generator:
    """Deterministic child RNG identified by (seed, path).

    Path components may be ints or strings; strings are hashed with crc32 so
    the derivation is stable across runs and platforms.  Distinct paths give
    statistically independent streams.
    """
    key = tuple(
        int(p) if isinstance(p, (int, np.integer)) else zlib.crc32(str(p).encode())
        for p in path
    )
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def to_complex(x: np.ndarray) -> np.ndarray:
    """(B, L, 2) real tensor -> (B, L) complex array (channel 0 = real part)."""
    if x.ndim != 3 or x.shape[2] != 2:
        raise ValueError(f"expected a (B, L, 2) signal tensor, got shape {x.shape}")
    return x[:, :, 0] + 1j * x[:, :, 1]


def from_complex(z: np.ndarray) -> np.ndarray:
    """(B, L) complex array -> (B, L, 2) real tensor."""
    if z.ndim != 2:
        raise ValueError(f"expected a (B, L) complex array, got shape {z.shape}")
    return np.stack([z.real, z.imag], axis=2)


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. uniform bits as uint8."""
    return rng.integers(0, 2, size=shape, dtype=np.uint8)


def bits_to_int(bits: np.ndarray) -> np.ndarray:
    """MSB-first bit rows -> integers. bits shape (..., w)."""
    w = bits.shape[-1]
    weights = 1 << np.arange(w - 1, -1, -1)
    return bits.astype(np.int64) @ weights


def int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Integers -> MSB-first bit rows of the given width."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)
