"""LDPC: alist IO, encoding against a GF(2) brute-force oracle, BP decoding,
and the PEG construction."""

import itertools

import numpy as np
import pytest

from phyae.errors import FormatError
from phyae.ldpc import (LdpcCode, bp_decode, bp_decode_many, check_node_messages, encode,
                        load_alist, peg_construct, syndrome_check, write_alist)
from phyae.util import random_bits, rng_stream

# (8, 4) toy code: full rank, minimum distance 3, and BP corrects every
# single-bit flip of every codeword (verified exhaustively below)
TOY_VAR_NEIGHBORS = [
    [0, 1], [0, 3], [1, 2], [2, 3], [0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3],
]
TOY_ALIST = (
    "8 4\n3 5\n2 2 2 2 3 3 3 3\n5 5 5 5\n"
    "1 2\n1 4\n2 3\n3 4\n1 2 3\n1 2 4\n1 3 4\n2 3 4\n"
    "1 2 5 6 7\n1 3 5 6 8\n3 4 5 7 8\n2 4 6 7 8\n"
)


def toy_code():
    return LdpcCode(TOY_VAR_NEIGHBORS, 4)


def all_codewords(code):
    """Brute-force GF(2) oracle: enumerate every word and keep null-space."""
    h = code.dense()
    words = []
    for bits in itertools.product([0, 1], repeat=code.n):
        w = np.array(bits, dtype=np.uint8)
        if not np.any((h @ w) % 2):
            words.append(w)
    return np.array(words)


class TestAlist:
    def test_hand_written_parse(self):
        code = load_alist(TOY_ALIST)
        assert code.n == 8 and code.m == 4
        for v, expected in enumerate(TOY_VAR_NEIGHBORS):
            np.testing.assert_array_equal(code.var_neighbors[v], sorted(expected))

    def test_write_load_identity(self):
        code = toy_code()
        text = write_alist(code)
        again = write_alist(load_alist(text))
        assert text == again

    def test_padded_zeros_accepted(self):
        code = toy_code()
        lines = write_alist(code).splitlines()
        lines[4] = lines[4] + " 0"
        assert load_alist("\n".join(lines) + "\n").n == 8

    def test_out_of_range_index_names_line(self):
        lines = TOY_ALIST.splitlines()
        lines[6] = "2 9"  # variable 3's check list, 9 > m on line 7
        with pytest.raises(FormatError, match="line 7.*out of range"):
            load_alist("\n".join(lines) + "\n")

    def test_degree_mismatch_rejected(self):
        text = "4 2\n1 2\n1 1 1 2\n2 2\n1\n2\n1\n1 2\n1 3\n2 4\n"
        with pytest.raises(FormatError):
            load_alist(text)

    def test_truncated_rejected(self):
        with pytest.raises(FormatError, match="truncated"):
            load_alist("8 4\n2 4\n")


class TestEncode:
    def test_all_zero_info(self):
        code = toy_code()
        np.testing.assert_array_equal(encode(np.zeros(code.k, dtype=np.uint8), code),
                                      np.zeros(code.n, dtype=np.uint8))

    def test_every_codeword_satisfies_syndrome(self):
        code = peg_construct(32, 16, var_degree=3, seed=1)
        rng = rng_stream(5, "encode")
        u = random_bits(rng, (1000, code.k))
        c = encode(u, code)
        assert np.all(syndrome_check(c, code))

    def test_matches_brute_force_oracle(self):
        code = toy_code()
        words = all_codewords(code)
        assert len(words) == 1 << code.k
        info = code.info_positions
        # the oracle word whose info positions carry u must equal encode(u)
        for u in itertools.product([0, 1], repeat=code.k):
            u = np.array(u, dtype=np.uint8)
            matches = words[np.all(words[:, info] == u, axis=1)]
            assert matches.shape[0] == 1  # systematic form is a bijection
            np.testing.assert_array_equal(encode(u, code), matches[0])

    def test_rank_deficient_rejected(self):
        # every column weight 2 makes the rows sum to zero: rank < m
        cycle = LdpcCode([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3],
                          [0, 1], [2, 3]], 4)
        with pytest.raises(FormatError, match="rank"):
            cycle.systematic_form()


class TestSyndrome:
    def test_zero_word(self):
        assert syndrome_check(np.zeros(8, dtype=np.uint8), toy_code())

    def test_single_flip_detected(self):
        code = toy_code()
        c = encode(np.array([1, 0, 1, 1], dtype=np.uint8), code)
        assert syndrome_check(c, code)
        for i in range(code.n):
            flipped = c.copy()
            flipped[i] ^= 1
            assert not syndrome_check(flipped, code)


class TestBpDecode:
    def strong_llrs(self, bits):
        return np.where(bits > 0, -20.0, 20.0)

    def test_noiseless_converges_in_one_iteration(self):
        code = toy_code()
        c = encode(np.array([1, 1, 0, 1], dtype=np.uint8), code)
        bits, converged, iters = bp_decode(self.strong_llrs(c), code)
        assert converged and iters == 1
        np.testing.assert_array_equal(bits, c)

    def test_single_flip_corrected_exhaustively_on_toy(self):
        # every codeword, every flip position; ML (minimum distance with
        # dmin=3) uniquely returns the transmitted word, and BP agrees
        code = toy_code()
        words = all_codewords(code)
        for u in itertools.product([0, 1], repeat=code.k):
            c = encode(np.array(u, dtype=np.uint8), code)
            for pos in range(code.n):
                llrs = self.strong_llrs(c)
                llrs[pos] = -llrs[pos]
                hard = (llrs < 0).astype(np.uint8)
                distances = np.sum(words != hard, axis=1)
                assert np.sum(distances == distances.min()) == 1
                np.testing.assert_array_equal(words[np.argmin(distances)], c)
                bits, converged, _ = bp_decode(llrs, code)
                assert converged
                np.testing.assert_array_equal(bits, c)

    def test_single_flip_corrected_on_peg_code(self):
        code = peg_construct(32, 16, var_degree=3, seed=2)
        rng = rng_stream(6, "flip")
        for trial in range(20):
            c = encode(random_bits(rng, code.k), code)
            llrs = self.strong_llrs(c) * 0.3
            pos = int(rng.integers(code.n))
            llrs[pos] = -llrs[pos]
            bits, converged, _ = bp_decode(llrs, code)
            assert converged
            np.testing.assert_array_equal(bits, c)

    def test_converged_output_always_satisfies_syndrome(self):
        code = toy_code()
        rng = rng_stream(7, "random-llr")
        llrs = rng.normal(scale=4.0, size=(200, code.n))
        bits, converged, _ = bp_decode_many(llrs, code)
        assert np.all(syndrome_check(bits[converged], code))

    def test_iteration_one_message_signs_scale_invariant(self):
        # tanh-rule messages keep their sign under uniform positive scaling
        code = peg_construct(24, 12, var_degree=3, seed=3)
        rng = rng_stream(8, "scale")
        llrs = rng.normal(scale=2.0, size=(code.n, 50))
        for alpha in (0.2, 1.0, 3.7, 11.0):
            base = check_node_messages(llrs[code.edge_var], code)
            scaled = check_node_messages(alpha * llrs[code.edge_var], code)
            np.testing.assert_array_equal(np.sign(base), np.sign(scaled))

    def test_noiseless_round_trip_many_blocks(self):
        code = peg_construct(64, 32, var_degree=3, seed=4)
        rng = rng_stream(9, "round-trip")
        u = random_bits(rng, (500, code.k))
        c = encode(u, code)
        bits, converged, _ = bp_decode_many(self.strong_llrs(c), code)
        assert np.all(converged)
        np.testing.assert_array_equal(bits[:, code.info_positions], u)

class TestPeg:
    def test_regular_degrees(self):
        code = peg_construct(128, 64, var_degree=3, seed=0)
        assert all(len(v) == 3 for v in code.var_neighbors)
        assert all(len(c) == 6 for c in code.check_neighbors)

    def test_full_rank_and_rate(self):
        code = peg_construct(128, 64, var_degree=3, seed=0)
        info, pivots, _ = code.systematic_form()
        assert info.size == 64 and pivots.size == 64

    def test_deterministic_per_seed(self):
        a = write_alist(peg_construct(64, 32, 3, seed=9))
        b = write_alist(peg_construct(64, 32, 3, seed=9))
        assert a == b
