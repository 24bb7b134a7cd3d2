"""Autoencoder construction, datasets, training, inference, checkpoints."""

import io

import numpy as np
import pytest

from gradcheck_util import jitter_params
from phyae.autoenc import (ArchConfig, Checkpoint, TrainConfig, bits_to_input,
                           build_freq_model, build_time_model,
                           extract_constellation, gen_dataset, infer_bits,
                           train)
from phyae.channel import ChannelSpec, NoiseModel
from phyae.errors import ConfigError, FormatError
from phyae.layers import ChannelLayer, Conv1D, LocallyConnected1D, PowerNormalize
from phyae.network import finite_difference_check
from phyae.util import rng_stream, to_complex

IDENTITY_TIME = ChannelSpec(taps=[1.0], noise=NoiseModel(snr_db=30.0))


def tiny_arch(**kw):
    defaults = dict(k=2, m_symbols=16, hidden=6, rx_kernel=5)
    defaults.update(kw)
    return ArchConfig(**defaults)


def flat_freq_channel(m, snr_db=30.0):
    return ChannelSpec(domain="frequency", gains=np.ones(m),
                       noise=NoiseModel(snr_db=snr_db))


class TestBuild:
    def test_output_shape_default_arch(self):
        arch = ArchConfig(k=6, m_symbols=400)
        net = build_time_model(arch, seed=0)
        bits = gen_dataset(2, 6, 400, 0)
        out = net.forward(bits_to_input(bits), add_noise=False,
                          channel=IDENTITY_TIME, train=False)
        assert out.shape == (2, 400, 6)

    def test_parameter_count_closed_form(self):
        # F=32, k=6: conv(k)1->F + dense F->F + conv5 F->F + dense F->2
        #            + conv9 2->F + conv5 F->F + dense F->6
        f, k, rx = 32, 6, 9
        expected = (k * f + f) + (f * f + f) + (5 * f * f + f) + (2 * f + 2) \
            + (rx * 2 * f + f) + (5 * f * f + f) + (f * k + k)
        net = build_time_model(ArchConfig(k=k, m_symbols=400), seed=0)
        assert net.num_params() == expected == 12456

    def test_tx_power_exactly_one(self):
        net = build_time_model(tiny_arch(), seed=1)
        bits = gen_dataset(3, 2, 16, 1)
        tx = net.tx_network().forward(bits_to_input(bits), train=False)
        np.testing.assert_allclose(np.mean(np.sum(tx ** 2, axis=2)), 1.0, atol=1e-12)

    def test_domain_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="domain"):
            build_time_model(tiny_arch(domain="frequency"))
        with pytest.raises(ConfigError, match="domain"):
            build_freq_model(tiny_arch())

    def test_freq_model_with_shared_kernels_equals_time_model(self):
        arch_t = tiny_arch(m_symbols=8)
        arch_f = tiny_arch(m_symbols=8, domain="frequency")
        time_net = build_time_model(arch_t, seed=3)
        freq_net = build_freq_model(arch_f, seed=3)
        for lt, lf in zip(time_net.layers, freq_net.layers):
            if isinstance(lf, LocallyConnected1D):
                lf.w[:] = lt.w[None]
                lf.b[:] = lt.b[None]
            elif hasattr(lf, "w"):
                lf.w[:] = lt.w
                lf.b[:] = lt.b
        bits = gen_dataset(2, 2, 8, 3)
        x = bits_to_input(bits)
        yt = time_net.forward(x, add_noise=False, channel=IDENTITY_TIME, train=False)
        yf = freq_net.forward(x, add_noise=False, channel=flat_freq_channel(8),
                              train=False)
        np.testing.assert_allclose(yt, yf, atol=1e-12)

    def test_freq_model_gradient_check(self):
        arch = tiny_arch(m_symbols=8, domain="frequency")
        net = build_freq_model(arch, seed=4)
        gains = 0.6 + 0.4 * np.exp(1j * np.linspace(0, 3, 8))
        net.layers[net.channel_index].channel_spec = ChannelSpec(
            domain="frequency", gains=gains, noise=NoiseModel(snr_db=20))
        jitter_params(net, seed=40)
        bits = gen_dataset(1, 2, 8, 4)
        target = bits_to_input(bits).reshape(1, 8, 2)
        assert finite_difference_check(net, bits_to_input(bits), target) <= 1e-4


class TestDataset:
    def test_bit_mean(self):
        bits = gen_dataset(250, 2, 2000, seed=5)  # 10^6 bits
        assert 0.499 <= bits.mean() <= 0.501

    def test_deterministic(self):
        np.testing.assert_array_equal(gen_dataset(10, 2, 8, 6),
                                      gen_dataset(10, 2, 8, 6))

    def test_splits_disjoint_streams(self):
        train_b = gen_dataset(10, 2, 8, 7, "train")
        val_b = gen_dataset(10, 2, 8, 7, "val")
        test_b = gen_dataset(10, 2, 8, 7, "test")
        assert not np.array_equal(train_b, val_b)
        assert not np.array_equal(train_b, test_b)
        assert not np.array_equal(val_b, test_b)


def quick_train(seed=0, epochs=3, **arch_kw):
    arch = tiny_arch(**arch_kw)
    model = build_time_model(arch, seed=seed)
    cfg = TrainConfig(n_train=1500, n_val=300, n_test=300, epochs=epochs,
                      train_snr_db=30.0, seed=seed)
    return train(model, IDENTITY_TIME, cfg)


class TestTrain:
    def test_loss_decreases(self):
        ckpt = quick_train()
        assert ckpt.history["train_loss"][-1] < ckpt.history["train_loss"][0]

    def test_deterministic_checkpoints(self):
        a = quick_train(seed=11)
        b = quick_train(seed=11)
        for pa, pb in zip(a.network.copy_params(), b.network.copy_params()):
            np.testing.assert_array_equal(pa, pb)

    def test_history_lengths_match(self):
        ckpt = quick_train(epochs=2)
        assert len(ckpt.history["train_loss"]) == 2
        assert len(ckpt.history["val_loss"]) == 2
        assert len(ckpt.history["seconds"]) == 2

    def test_channel_domain_mismatch_rejected(self):
        model = build_time_model(tiny_arch(m_symbols=8), seed=0)
        with pytest.raises(ConfigError, match="domain"):
            train(model, flat_freq_channel(8), TrainConfig(n_train=10, epochs=1))

    def test_log_lines_emitted(self):
        arch = tiny_arch(m_symbols=8)
        model = build_time_model(arch, seed=0)
        cfg = TrainConfig(n_train=64, n_val=32, epochs=2, train_snr_db=30.0)
        log = io.StringIO()
        train(model, IDENTITY_TIME, cfg, log_file=log)
        lines = [l for l in log.getvalue().splitlines() if l.startswith("epoch")]
        assert len(lines) == 2
        assert "train_loss" in lines[0] and "wall_seconds" in lines[0]


class TestInference:
    def test_any_length_runs_without_parameter_change(self):
        ckpt = quick_train()
        before = ckpt.network.copy_params()
        for m_run in (8, 50, 200):
            bits = gen_dataset(2, 2, m_run, 12, "test")
            probs, hard = infer_bits(ckpt, bits, rng=rng_stream(0, "inf", m_run))
            assert probs.shape == (2, 2 * m_run)
            assert np.all((probs >= 0) & (probs <= 1))
            assert hard.dtype == np.uint8
        for pa, pb in zip(before, ckpt.network.copy_params()):
            np.testing.assert_array_equal(pa, pb)

    def test_smoke_trained_model_recovers_bits(self):
        ckpt = quick_train(epochs=8)
        bits = gen_dataset(8, 2, 16, 13, "test")
        _, hard = infer_bits(ckpt, bits, add_noise=False)
        assert np.mean(hard != bits) < 0.05

    def test_too_short_sequence_rejected(self):
        ckpt = quick_train(epochs=1)
        with pytest.raises(ValueError, match="shorter than"):
            infer_bits(ckpt, np.zeros((1, 4), dtype=np.uint8), add_noise=False)

    def test_frequency_model_fixed_length(self):
        arch = tiny_arch(m_symbols=8, domain="frequency")
        model = build_freq_model(arch, seed=5)
        cfg = TrainConfig(n_train=64, n_val=32, epochs=1, train_snr_db=30.0)
        ckpt = train(model, flat_freq_channel(8), cfg)
        bits = gen_dataset(1, 2, 8, 14, "test")
        probs, _ = infer_bits(ckpt, bits, add_noise=False)
        assert probs.shape == (1, 16)
        with pytest.raises(ValueError, match="bound to M=8"):
            infer_bits(ckpt, np.zeros((1, 32), dtype=np.uint8), add_noise=False)

    def test_interior_window_consistency_with_pinned_scale(self):
        # the checkable core of the any-length property: away from the
        # boundaries, probabilities do not depend on the window, once the
        # global normalization scale is pinned
        ckpt = quick_train(epochs=2)
        long_bits = gen_dataset(1, 2, 120, 15, "test")
        probs_long, _ = infer_bits(ckpt, long_bits, add_noise=False)
        scale = ckpt.network.layers[7].last_scale
        assert isinstance(ckpt.network.layers[7], PowerNormalize)
        lo, hi = 30, 90  # symbol window
        window_bits = long_bits[:, 2 * lo:2 * hi]
        probs_win, _ = infer_bits(ckpt, window_bits, add_noise=False,
                                  norm_scale=scale)
        margin = 12  # symbols; > receptive-field half-width
        inner_long = probs_long.reshape(1, 120, 2)[:, lo + margin:hi - margin]
        inner_win = probs_win.reshape(1, 60, 2)[:, margin:-margin]
        np.testing.assert_allclose(inner_long, inner_win, atol=1e-9)

    def test_shift_equivariance_interior(self):
        # shifting input bits by k shifts interior TX symbols by one
        ckpt = quick_train(epochs=1)
        tx = ckpt.network.tx_network()
        bits = gen_dataset(1, 2, 100, 16, "test")[0]
        shifted = np.concatenate([bits[2:], bits[:2]])
        y1 = to_complex(tx.forward(bits_to_input(bits[None]), train=False))[0]
        y2 = to_complex(tx.forward(bits_to_input(shifted[None]), train=False))[0]
        margin = 10
        w1 = y1[margin:100 - margin - 1]
        w2 = y2[margin - 1:100 - margin - 2]  # one symbol earlier
        w1 = w1 / np.linalg.norm(w1)
        w2 = w2 / np.linalg.norm(w2)
        np.testing.assert_allclose(w1, w2, atol=1e-9)


class TestEndToEndGradients:
    def test_full_graph_finite_differences(self):
        arch = tiny_arch(m_symbols=8)
        net = build_time_model(arch, seed=6)
        taps = np.array([1.0, 0.4 * np.exp(1j * 0.9)])
        net.layers[net.channel_index].channel_spec = ChannelSpec(
            taps=taps, noise=NoiseModel(snr_db=15))
        jitter_params(net, seed=41)
        bits = gen_dataset(1, 2, 8, 17)
        target = bits_to_input(bits).reshape(1, 8, 2)
        assert finite_difference_check(net, bits_to_input(bits), target) <= 1e-4


class TestCheckpointFile:
    def test_round_trip_bitwise_inference(self, tmp_path):
        ckpt = quick_train(epochs=2)
        path = tmp_path / "model.ckpt"
        ckpt.save(path)
        loaded = Checkpoint.load(path)
        probe = gen_dataset(2, 2, 16, 18, "test")
        a, _ = infer_bits(ckpt, probe, add_noise=False)
        b, _ = infer_bits(loaded, probe, add_noise=False)
        np.testing.assert_array_equal(a, b)
        assert loaded.train_cfg == ckpt.train_cfg
        assert loaded.arch == ckpt.arch

    def test_channel_taps_recorded(self, tmp_path):
        ckpt = quick_train(epochs=1)
        path = tmp_path / "model.ckpt"
        ckpt.save(path)
        loaded = Checkpoint.load(path)
        np.testing.assert_allclose(loaded.channel.taps, [1.0])
        assert loaded.channel.noise.snr_db == 30.0

    def test_corrupted_magic_rejected(self, tmp_path):
        ckpt = quick_train(epochs=1)
        path = tmp_path / "model.ckpt"
        ckpt.save(path)
        blob = bytearray(path.read_bytes())
        blob[:3] = b"bad"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            Checkpoint.load(path)

    def test_truncated_rejected(self, tmp_path):
        ckpt = quick_train(epochs=1)
        path = tmp_path / "model.ckpt"
        ckpt.save(path)
        path.write_bytes(path.read_bytes()[:-64])
        with pytest.raises(FormatError, match="truncated"):
            Checkpoint.load(path)


class TestConstellation:
    def test_count_and_power(self):
        ckpt = quick_train(epochs=1)
        points, stats = extract_constellation(ckpt, n_symbols=4000, seed=0)
        assert points.shape == (4000,)
        np.testing.assert_allclose(stats["mean_power"], 1.0, atol=1e-6)
        assert len(stats["radial_hist"]) == 16
        assert sum(stats["radial_hist"]) == 4000

    def test_untrained_model_nondegenerate(self):
        arch = tiny_arch()
        model = build_time_model(arch, seed=9)
        ckpt = Checkpoint(arch=arch, train_cfg=TrainConfig(), channel=IDENTITY_TIME,
                          network=model, history={})
        points, _ = extract_constellation(ckpt, n_symbols=1000, seed=1)
        assert np.std(points.real) > 1e-3 and np.std(points.imag) > 1e-3
        assert np.unique(np.round(points, 9)).size > 10
