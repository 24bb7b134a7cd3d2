"""QAM mapping, slicing, LLRs, and the closed-form AWGN BER."""

import numpy as np
import pytest

from phyae.qam import (QamSpec, awgn_ber_theory, demod_hard, llr, modulate,
                       qfunc, snr_for_theory_ber)
from phyae.util import random_bits


def brute_force_nearest(y, spec):
    """Enumeration oracle: nearest of all 2^k points, lowest label on ties."""
    points = spec.constellation()
    return int(np.argmin(np.abs(points - y) ** 2))


class TestModulate:
    def test_qpsk_all_zero(self):
        sym = modulate(np.array([0, 0]), QamSpec(2))
        np.testing.assert_allclose(sym, [(-1 - 1j) / np.sqrt(2)])

    def test_64qam_all_zero(self):
        sym = modulate(np.zeros(6, dtype=int), QamSpec(6))
        np.testing.assert_allclose(sym, [(-7 - 7j) / np.sqrt(42)])

    @pytest.mark.parametrize("k,expected_scale", [(2, 1 / np.sqrt(2)),
                                                  (4, 1 / np.sqrt(10)),
                                                  (6, 1 / np.sqrt(42)),
                                                  (8, 1 / np.sqrt(170))])
    def test_normalization_constant(self, k, expected_scale):
        spec = QamSpec(k)
        np.testing.assert_allclose(spec.scale, expected_scale, atol=1e-15)
        energy = np.mean(np.abs(spec.constellation()) ** 2)
        np.testing.assert_allclose(energy, 1.0, atol=1e-12)

    @pytest.mark.parametrize("k", [2, 4, 6, 8])
    def test_gray_adjacency(self, k):
        # points adjacent along one axis differ in exactly one bit
        spec = QamSpec(k)
        n = spec.n_levels
        for j in range(n - 1):
            diff = spec.gray[j] ^ spec.gray[j + 1]
            assert bin(diff).count("1") == 1

    def test_length_not_divisible_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            modulate(np.zeros(7, dtype=int), QamSpec(6))


class TestDemodHard:
    @pytest.mark.parametrize("k", [2, 4, 6, 8])
    def test_round_trip_all_patterns(self, k):
        spec = QamSpec(k)
        bits = np.array([[int(b) for b in format(v, f"0{k}b")]
                         for v in range(1 << k)]).reshape(-1)
        np.testing.assert_array_equal(demod_hard(modulate(bits, spec), spec), bits)

    def test_round_trip_random_noiseless(self):
        spec = QamSpec(6)
        bits = random_bits(np.random.default_rng(0), 10_002)
        np.testing.assert_array_equal(demod_hard(modulate(bits, spec), spec), bits)

    def test_midpoint_tie_breaks_low(self):
        spec = QamSpec(4)  # levels -3,-1,1,3; midpoint 0 between -1 and 1
        sym = np.array([0.0 + 0.0j])
        bits = demod_hard(sym, spec)
        # lower level (-1) on both axes: gray index 1 -> pattern 01 per axis
        np.testing.assert_array_equal(bits, [0, 1, 0, 1])

    def test_matches_enumeration_oracle(self):
        spec = QamSpec(2)
        y = 0.9 - 1.2j
        label = brute_force_nearest(y, spec)
        expected = [int(b) for b in format(label, "02b")]
        np.testing.assert_array_equal(demod_hard(np.array([y]), spec), expected)
        assert expected == [1, 0]

    def test_noisy_matches_enumeration_oracle(self):
        spec = QamSpec(6)
        rng = np.random.default_rng(1)
        clean = modulate(random_bits(rng, 600), spec)
        noisy = clean + 0.2 * (rng.normal(size=100) + 1j * rng.normal(size=100))
        got = demod_hard(noisy, spec).reshape(100, 6)
        for i in range(100):
            label = brute_force_nearest(noisy[i], spec)
            np.testing.assert_array_equal(got[i], [int(b) for b in format(label, "06b")])


class TestLlr:
    def test_sign_matches_point_bits_at_high_snr(self):
        spec = QamSpec(6)
        bits = random_bits(np.random.default_rng(2), 120)
        sym = modulate(bits, spec)
        values = llr(sym, spec, n0=1e-4)
        hard = (values < 0).astype(np.uint8)  # positive -> bit 0
        np.testing.assert_array_equal(hard, bits)

    def test_qpsk_exhaustive_oracle(self):
        spec = QamSpec(2)
        y = (-1 - 1j) / np.sqrt(2)
        n0 = 1.0
        points = spec.constellation()
        got = llr(np.array([y]), spec, n0)
        for b in range(2):
            ones = [p for v, p in enumerate(points) if (v >> (1 - b)) & 1]
            zeros = [p for v, p in enumerate(points) if not (v >> (1 - b)) & 1]
            expected = (min(abs(y - p) ** 2 for p in ones)
                        - min(abs(y - p) ** 2 for p in zeros)) / n0
            np.testing.assert_allclose(got[b], expected, atol=1e-12)
        # sitting exactly on the all-zeros point: both LLRs positive, gap 4/sqrt(2)^2 * ...
        assert np.all(got > 0)

    def test_exhaustive_oracle_random_noisy_64qam(self):
        spec = QamSpec(6)
        rng = np.random.default_rng(3)
        y = modulate(random_bits(rng, 300), spec) + 0.15 * (
            rng.normal(size=50) + 1j * rng.normal(size=50))
        got = llr(y, spec, n0=0.3).reshape(50, 6)
        points = spec.constellation()
        for i in range(50):
            d2 = np.abs(y[i] - points) ** 2
            for b in range(6):
                bit_of = (np.arange(64) >> (5 - b)) & 1
                expected = (d2[bit_of == 1].min() - d2[bit_of == 0].min()) / 0.3
                np.testing.assert_allclose(got[i, b], expected, atol=1e-12)

    def test_hard_decision_consistent_with_slicer(self):
        spec = QamSpec(6)
        rng = np.random.default_rng(4)
        y = modulate(random_bits(rng, 60_000), spec) + 0.12 * (
            rng.normal(size=10_000) + 1j * rng.normal(size=10_000))
        from_llr = (llr(y, spec, 0.25) < 0).astype(np.uint8)
        np.testing.assert_array_equal(from_llr, demod_hard(y, spec))


class TestTheory:
    def test_monotone_decreasing(self):
        spec = QamSpec(6)
        values = [awgn_ber_theory(spec, snr) for snr in np.arange(0, 30, 1.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_qpsk_closed_form(self):
        # k=2 at Es/N0 = 10 dB: exactly Q(sqrt(10))
        got = awgn_ber_theory(QamSpec(2), 10.0)
        np.testing.assert_allclose(got, qfunc(np.sqrt(10.0)), rtol=1e-12)
        np.testing.assert_allclose(got, 7.827e-4, rtol=1e-3)

    def test_snr_inversion(self):
        spec = QamSpec(6)
        snr = snr_for_theory_ber(spec, 1e-2)
        np.testing.assert_allclose(awgn_ber_theory(spec, snr), 1e-2, rtol=1e-6)
