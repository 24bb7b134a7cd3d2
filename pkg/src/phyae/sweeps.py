"""Monte-Carlo experiment harness: BER sweeps for learned and QAM systems,
LDPC-coded pipelines, robustness and bursty-noise studies, receiver-scaling
benchmarks, and CSV/metadata export.

Determinism and variance reduction: all randomness derives from
(seed, purpose, snr_index, chunk_index) streams.  Bits and noise for a given
chunk are therefore identical across systems whenever their per-chunk symbol
counts match (common random numbers); the metadata records whether that held.
The cyclic-prefixed QAM pipeline inserts extra prefix symbols, so its noise
stream is independent.

A rerun from a metadata file must reproduce the result CSV byte-for-byte.
Simulated quantities (bits, errors, BER) are re-derived and verified; wall
times are provenance, so the reproduction writes the recorded timings rather
than re-measuring them.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .autoenc import Checkpoint, infer_bits
from .channel import ChannelSpec, sample_noise, perturb_taps
from .equalize import add_cyclic_prefix, equalize, fde_receive
from .errors import ConfigError, SimulationError
from .ldpc import bp_decode_many, encode, read_alist
from .qam import QamSpec, demod_hard, llr as qam_llr, modulate
from .spectral import fft, freq_response, ifft
from .util import from_complex, random_bits, rng_stream, to_complex

CHUNK_SYMBOLS = 38400  # divisible by 400, 256, and 64
LLR_CLAMP = 30.0


@dataclass
class BerRecord:
    snr_db: float
    bits_sent: int
    bit_errors: int
    ber: float
    elapsed_seconds: float

    def to_dict(self):
        return {"snr_db": self.snr_db, "bits_sent": self.bits_sent,
                "bit_errors": self.bit_errors, "ber": self.ber,
                "elapsed_seconds": self.elapsed_seconds}

    @classmethod
    def from_dict(cls, d):
        return cls(d["snr_db"], d["bits_sent"], d["bit_errors"], d["ber"],
                   d["elapsed_seconds"])


@dataclass
class StoppingRule:
    min_bit_errors: int = 100
    max_bits: int = 10_000_000

    def __post_init__(self):
        if self.min_bit_errors < 1 or self.max_bits < 1:
            raise ConfigError("stopping rule counts must be positive")


@dataclass
class ExperimentConfig:
    system: dict
    channel: ChannelSpec
    snr_grid: list
    stopping: StoppingRule = field(default_factory=StoppingRule)
    seed: int = 12345
    ldpc: dict | None = None

    def __post_init__(self):
        grid = [float(s) for s in self.snr_grid]
        if not grid:
            raise ConfigError("snr grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("snr grid must be strictly increasing")
        self.snr_grid = grid
        kind = self.system.get("kind")
        if kind not in ("qam", "learned"):
            raise ConfigError(f"unknown system kind {self.system.get('kind')!r}")
        if kind == "learned" and "checkpoint" not in self.system:
            raise ConfigError("learned system needs a checkpoint path")

    def to_dict(self):
        system = {k: v for k, v in self.system.items() if not k.startswith("_")}
        d = {"system": system, "channel": self.channel.to_dict(),
             "snr_grid": self.snr_grid,
             "stopping": {"min_bit_errors": self.stopping.min_bit_errors,
                          "max_bits": self.stopping.max_bits},
             "seed": self.seed}
        if self.ldpc is not None:
            d["ldpc"] = self.ldpc
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(system=d["system"],
                   channel=ChannelSpec.from_dict(d["channel"]),
                   snr_grid=d["snr_grid"],
                   stopping=StoppingRule(**d.get("stopping", {})),
                   seed=int(d.get("seed", 12345)),
                   ldpc=d.get("ldpc"))


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

class QamSystem:
    """Gray QAM with a flat, cyclic-prefixed SC-FDE, or per-subcarrier path
    depending on the channel/equalizer combination."""

    def __init__(self, cfg: dict, channel: ChannelSpec):
        self.spec = QamSpec(int(cfg.get("k", 6)))
        self.equalizer = cfg.get("equalizer")
        self.n_fft = int(cfg.get("n_fft", 256))
        self.channel = channel
        if channel.domain == "time":
            flat = channel.taps.size == 1
            if not flat and self.equalizer not in ("zf", "mmse"):
                raise ConfigError("multipath time channel needs a zf/mmse equalizer")
            self.mode = "flat" if flat else "fde"
            if self.mode == "fde":
                self.cp = channel.taps.size - 1
                # perfect CSI by default; robustness studies override
                self.csi_taps = np.asarray(cfg.get("csi_taps", channel.taps),
                                           dtype=np.complex128)
        else:
            if self.equalizer not in ("zf", "mmse"):
                raise ConfigError("frequency-domain channel needs a zf/mmse equalizer")
            self.mode = "subcarrier"

    @property
    def bits_per_symbol(self):
        return self.spec.k

    def crn_compatible(self):
        return self.mode in ("flat", "subcarrier")

    def _n0(self, snr_db):
        return 10.0 ** (-snr_db / 10.0)

    def _receive(self, tx_bits, snr_db, noise_rng):
        """Equalized symbol stream plus the per-bit 1/N0_eff LLR scaling."""
        chan = self.channel.with_noise(snr_db=snr_db)
        n0 = self._n0(snr_db)
        sym = modulate(tx_bits, self.spec)
        if self.mode == "flat":
            noise = to_complex(sample_noise(chan, (1, sym.size, 2), noise_rng))[0]
            eq = (chan.taps[0] * sym + noise) / chan.taps[0]
            return eq, np.abs(chan.taps[0]) ** 2 / n0
        if self.mode == "subcarrier":
            gains = chan.gains
            noise = to_complex(sample_noise(chan, (1, sym.size, 2), noise_rng))[0]
            y = sym.reshape(-1, gains.size) * gains[None, :] + noise.reshape(-1, gains.size)
            eq = equalize(y, gains[None, :], self.equalizer, n0)
            # per-bin post-equalization noise power N0/|H|^2; erased bins
            # carry no information so their LLRs are driven to ~0
            alive = np.abs(gains) > 1e-12
            inv_n0 = np.where(alive, np.abs(gains) ** 2 / n0, 1e-9)
            scale = np.repeat(np.tile(inv_n0, eq.shape[0]), self.spec.k)
            return eq.reshape(-1), scale
        # fde: cyclic-prefixed blocks through the true taps, equalized with
        # the (possibly stale) CSI taps
        stream = add_cyclic_prefix(sym, self.n_fft, self.cp)
        rx = _convolve_stream(stream, chan.taps)
        noise = to_complex(sample_noise(chan, (1, rx.size, 2), noise_rng))[0]
        eq = fde_receive(rx + noise, self.csi_taps, self.n_fft, self.cp,
                         self.equalizer, n0)
        return eq, 1.0 / n0

    def soft_chunk(self, tx_bits, snr_db, noise_rng):
        eq, inv_n0 = self._receive(tx_bits, snr_db, noise_rng)
        return qam_llr(eq, self.spec, 1.0) * inv_n0

    def chunk_errors(self, tx_bits, snr_db, noise_rng):
        eq, _ = self._receive(tx_bits, snr_db, noise_rng)
        return int(np.sum(demod_hard(eq, self.spec) != tx_bits))


def _convolve_stream(stream, taps):
    out = np.zeros_like(stream)
    for d, h in enumerate(taps):
        if h == 0:
            continue
        if d == 0:
            out += h * stream
        else:
            out[d:] += h * stream[:stream.size - d]
    return out


class LearnedSystem:
    """Autoencoder checkpoint run end to end through the channel layer."""

    def __init__(self, cfg: dict, channel: ChannelSpec):
        ckpt = cfg.get("_checkpoint")
        self.ckpt = ckpt if ckpt is not None else Checkpoint.load(cfg["checkpoint"])
        self.channel = channel
        arch = self.ckpt.arch
        if channel.domain != arch.domain:
            raise ConfigError(
                f"checkpoint domain {arch.domain!r} incompatible with channel "
                f"domain {channel.domain!r}")
        self.m_run = int(cfg.get("m_run", arch.m_symbols))
        if arch.domain == "frequency" and self.m_run != arch.m_symbols:
            raise ConfigError("frequency-domain checkpoints are bound to their M")

    @property
    def bits_per_symbol(self):
        return self.ckpt.arch.k

    def crn_compatible(self):
        return True

    def soft_chunk(self, tx_bits, snr_db, noise_rng):
        chan = self.channel.with_noise(snr_db=snr_db)
        k = self.ckpt.arch.k
        n_sym = tx_bits.size // k
        rows = tx_bits.reshape(n_sym // self.m_run, k * self.m_run)
        noise = sample_noise(chan, (1, n_sym, 2), noise_rng)
        noise = noise.reshape(rows.shape[0], self.m_run, 2)
        probs, _ = infer_bits(self.ckpt, rows, channel=chan,
                              noise_override=noise)
        p = np.clip(probs.reshape(-1), 1e-13, 1 - 1e-13)
        return np.clip(np.log((1.0 - p) / p), -LLR_CLAMP, LLR_CLAMP)

    def chunk_errors(self, tx_bits, snr_db, noise_rng):
        hard = (self.soft_chunk(tx_bits, snr_db, noise_rng) < 0).astype(np.uint8)
        return int(np.sum(hard != tx_bits))


def make_system(cfg: ExperimentConfig):
    if cfg.system["kind"] == "qam":
        return QamSystem(cfg.system, cfg.channel)
    return LearnedSystem(cfg.system, cfg.channel)


def _chunk_bits(system, chunk_symbols):
    if isinstance(system, LearnedSystem):
        m = system.m_run
        if chunk_symbols % m != 0:
            chunk_symbols = max(m, (chunk_symbols // m) * m)
    elif system.mode == "fde":
        n = system.n_fft
        if chunk_symbols % n != 0:
            chunk_symbols = max(n, (chunk_symbols // n) * n)
    elif system.mode == "subcarrier":
        m = system.channel.gains.size
        if chunk_symbols % m != 0:
            chunk_symbols = max(m, (chunk_symbols // m) * m)
    return chunk_symbols * system.bits_per_symbol


@dataclass
class SweepResult:
    records: list
    reached_min_errors: list
    crn: bool


def ber_sweep(cfg: ExperimentConfig, chunk_symbols: int = CHUNK_SYMBOLS) -> SweepResult:
    """Stream random bits through the system at every SNR until the stopping
    rule fires.  Deterministic per cfg.seed."""
    system = make_system(cfg)
    n_bits = _chunk_bits(system, chunk_symbols)
    records, reached = [], []
    for i, snr in enumerate(cfg.snr_grid):
        t0 = time.perf_counter()
        bits_sent = errors = 0
        chunk = 0
        while errors < cfg.stopping.min_bit_errors and bits_sent < cfg.stopping.max_bits:
            tx_bits = random_bits(rng_stream(cfg.seed, "bits", i, chunk), n_bits)
            noise_rng = rng_stream(cfg.seed, "noise", i, chunk)
            errors += system.chunk_errors(tx_bits, snr, noise_rng)
            bits_sent += n_bits
            chunk += 1
        records.append(BerRecord(snr, bits_sent, errors, errors / bits_sent,
                                 time.perf_counter() - t0))
        reached.append(errors >= cfg.stopping.min_bit_errors)
    return SweepResult(records, reached, system.crn_compatible())


# ---------------------------------------------------------------------------
# LDPC-coded pipeline
# ---------------------------------------------------------------------------

def probs_to_llr(p):
    """Sigmoid bit probabilities -> LLRs (positive means bit 0), clamped."""
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-13, 1 - 1e-13)
    return np.clip(np.log((1.0 - p) / p), -LLR_CLAMP, LLR_CLAMP)


def ldpc_pipeline(cfg: ExperimentConfig, chunk_symbols: int = CHUNK_SYMBOLS) -> SweepResult:
    """info bits -> LDPC encode -> interleave -> system TX/channel/RX soft
    output -> deinterleave -> BP decode -> info-bit BER."""
    if not cfg.ldpc:
        raise ConfigError("ldpc_pipeline needs cfg.ldpc with an alist path")
    code = read_alist(cfg.ldpc["alist"])
    max_iters = int(cfg.ldpc.get("max_iters", 50))
    system = make_system(cfg)
    k_sym = system.bits_per_symbol

    # whole blocks per chunk, aligned to the system's sequence granularity
    bits_granule = _chunk_bits(system, 1)  # smallest usable bit count
    lcm = (code.n * bits_granule) // math.gcd(code.n, bits_granule)
    target = max(1, (chunk_symbols * k_sym) // lcm) * lcm
    blocks_per_chunk = target // code.n
    perm = rng_stream(cfg.seed, "interleaver").permutation(code.n)

    records, reached = [], []
    info_pos = code.info_positions
    for i, snr in enumerate(cfg.snr_grid):
        t0 = time.perf_counter()
        bits_sent = errors = 0
        chunk = 0
        while errors < cfg.stopping.min_bit_errors and bits_sent < cfg.stopping.max_bits:
            info = random_bits(rng_stream(cfg.seed, "info-bits", i, chunk),
                               (blocks_per_chunk, code.k))
            coded = encode(info, code)
            tx_bits = coded[:, perm].reshape(-1)
            noise_rng = rng_stream(cfg.seed, "noise", i, chunk)
            stream_llr = system.soft_chunk(tx_bits, snr, noise_rng)
            block_llr = np.empty((blocks_per_chunk, code.n))
            block_llr[:, perm] = stream_llr.reshape(blocks_per_chunk, code.n)
            decoded, _, _ = bp_decode_many(block_llr, code, max_iters)
            errors += int(np.sum(decoded[:, info_pos] != info))
            bits_sent += info.size
            chunk += 1
        records.append(BerRecord(snr, bits_sent, errors, errors / bits_sent,
                                 time.perf_counter() - t0))
        reached.append(errors >= cfg.stopping.min_bit_errors)
    return SweepResult(records, reached, system.crn_compatible())


# ---------------------------------------------------------------------------
# Robustness to channel perturbation
# ---------------------------------------------------------------------------

def _mini_ber(system, snr, seed, snr_idx, trial, max_bits, min_errors, n_bits):
    bits_sent = errors = 0
    chunk = 0
    while errors < min_errors and bits_sent < max_bits:
        tx = random_bits(rng_stream(seed, "rb-bits", snr_idx, trial, chunk), n_bits)
        noise_rng = rng_stream(seed, "rb-noise", snr_idx, trial, chunk)
        errors += system.chunk_errors(tx, snr, noise_rng)
        bits_sent += n_bits
        chunk += 1
    return errors / bits_sent


def robustness_eval(ckpt: Checkpoint, base_channel: ChannelSpec, snr_grid,
                    perturb_std: float = 0.05, n_trials: int = 100,
                    seed: int = 12345, qam_cfg: dict | None = None,
                    trial_max_bits: int = 200_000, trial_min_errors: int = 60,
                    chunk_symbols: int = 12800) -> dict:
    """Per-trial tap perturbation; the MMSE baseline keeps the unperturbed
    taps as CSI while the channel itself drifts.  Returns per-SNR mean/std
    BER for both systems plus the unperturbed reference."""
    if base_channel.domain != "time":
        raise ConfigError("robustness study is defined for time-domain channels")
    if perturb_std < 0:
        raise ConfigError("perturb_std must be >= 0")
    qam_cfg = dict(qam_cfg or {"k": ckpt.arch.k, "equalizer": "mmse"})
    qam_cfg["csi_taps"] = base_channel.taps

    snr_grid = [float(s) for s in snr_grid]
    out = {
        "snr_db": snr_grid,
        "perturb_std": perturb_std,
        "n_trials": n_trials,
        "learned": {"mean": [], "std": [], "unperturbed": []},
        "baseline": {"mean": [], "std": [], "unperturbed": []},
    }
    learned_trials = np.zeros((n_trials, len(snr_grid)))
    baseline_trials = np.zeros((n_trials, len(snr_grid)))
    for t in range(n_trials):
        taps_t = perturb_taps(base_channel.taps,
                              perturb_std, rng_stream(seed, "perturb", t))
        chan_t = base_channel.with_taps(taps_t)
        learned = LearnedSystem({"_checkpoint": ckpt}, chan_t)
        baseline = QamSystem(qam_cfg, chan_t)
        for si, snr in enumerate(snr_grid):
            n_bits_l = _chunk_bits(learned, chunk_symbols)
            n_bits_q = _chunk_bits(baseline, chunk_symbols)
            learned_trials[t, si] = _mini_ber(
                learned, snr, seed, si, t, trial_max_bits, trial_min_errors, n_bits_l)
            baseline_trials[t, si] = _mini_ber(
                baseline, snr, seed, si, t, trial_max_bits, trial_min_errors, n_bits_q)
    for si, snr in enumerate(snr_grid):
        learned0 = LearnedSystem({"_checkpoint": ckpt}, base_channel)
        baseline0 = QamSystem(qam_cfg, base_channel)
        n_bits_l = _chunk_bits(learned0, chunk_symbols)
        n_bits_q = _chunk_bits(baseline0, chunk_symbols)
        out["learned"]["unperturbed"].append(_mini_ber(
            learned0, snr, seed, si, n_trials + 1, 3 * trial_max_bits,
            3 * trial_min_errors, n_bits_l))
        out["baseline"]["unperturbed"].append(_mini_ber(
            baseline0, snr, seed, si, n_trials + 1, 3 * trial_max_bits,
            3 * trial_min_errors, n_bits_q))
        out["learned"]["mean"].append(float(learned_trials[:, si].mean()))
        out["learned"]["std"].append(float(learned_trials[:, si].std(ddof=1)))
        out["baseline"]["mean"].append(float(baseline_trials[:, si].mean()))
        out["baseline"]["std"].append(float(baseline_trials[:, si].std(ddof=1)))
    return out


def bursty_eval(ckpt: Checkpoint, snr_grid, burst_probability: float = 0.05,
                burst_sigma_multiplier: float = 5.0, seed: int = 12345,
                stopping: StoppingRule | None = None,
                chunk_symbols: int = CHUNK_SYMBOLS) -> dict:
    """Learned system (trained on plain AWGN) vs uncoded QAM under bursty
    noise on a flat channel; identical noise realizations for both."""
    stopping = stopping or StoppingRule()
    noise = {"kind": "bursty", "snr_db": 12.0,
             "burst_probability": burst_probability,
             "burst_sigma_multiplier": burst_sigma_multiplier}
    chan = ChannelSpec.from_dict({"domain": "time", "taps": [[0, 1.0, 0.0]],
                                  "noise": noise})
    results = {}
    for name, system_cfg in (("learned", {"kind": "learned", "_checkpoint": ckpt}),
                             ("qam", {"kind": "qam", "k": ckpt.arch.k})):
        cfg = ExperimentConfig(system=system_cfg, channel=chan,
                               snr_grid=snr_grid, stopping=stopping, seed=seed)
        results[name] = ber_sweep(cfg, chunk_symbols)
    return results


# ---------------------------------------------------------------------------
# Receiver scaling benchmark
# ---------------------------------------------------------------------------

def timing_bench(ckpt: Checkpoint, lengths, seed: int = 0, repeats: int = 5,
                 taps=None, qam_k: int | None = None) -> dict:
    """Wall-clock receiver cost vs sequence length (best of `repeats`), with
    log-log slope fits.  Learned side: RX sub-network forward.  Baseline:
    fft -> MMSE -> ifft -> hard demod on one block."""
    lengths = [int(n) for n in lengths]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ConfigError("lengths must be strictly increasing")
    for n in lengths:
        if n & (n - 1):
            raise ConfigError(f"length {n} is not a power of 2 (FFT path)")
    if taps is None:
        from .channel import channel_a_taps
        taps = channel_a_taps()
    spec = QamSpec(qam_k or ckpt.arch.k)
    rx = ckpt.network.rx_network()
    rng = rng_stream(seed, "bench")
    learned_s, mmse_s = [], []
    for n in lengths:
        x = rng.normal(size=(1, n, 2))
        y = rng.normal(size=n) + 1j * rng.normal(size=n)
        gains = freq_response(taps, n)
        best_l = min(_time_call(lambda: rx.forward(x, train=False))
                     for _ in range(repeats))
        n0 = 0.05

        def mmse_path():
            eq = ifft(equalize(fft(y), gains, "mmse", n0))
            return demod_hard(eq, spec)

        best_m = min(_time_call(mmse_path) for _ in range(repeats))
        learned_s.append(best_l)
        mmse_s.append(best_m)
    out = {"lengths": lengths, "learned_seconds": learned_s,
           "mmse_seconds": mmse_s}
    for name, ts in (("learned", learned_s), ("mmse", mmse_s)):
        slope, stderr = _loglog_slope(lengths, ts)
        out[f"{name}_slope"] = slope
        out[f"{name}_slope_stderr"] = stderr
    return out


def _time_call(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def _loglog_slope(lengths, seconds):
    x = np.log(np.asarray(lengths, dtype=np.float64))
    y = np.log(np.asarray(seconds, dtype=np.float64))
    (slope, intercept), cov = np.polyfit(x, y, 1, cov=True)
    return float(slope), float(np.sqrt(cov[0, 0]))


# ---------------------------------------------------------------------------
# Export / reproduce
# ---------------------------------------------------------------------------

CSV_HEADER = "snr_db,bits,errors,ber,seconds"


def records_to_csv(records) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(f"{r.snr_db!r},{r.bits_sent},{r.bit_errors},{r.ber!r},"
                     f"{r.elapsed_seconds!r}")
    return "\n".join(lines) + "\n"


def load_records(path) -> list:
    with open(path) as f:
        text = f.read()
    lines = text.strip().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise SimulationError(f"{path}: not a BER results CSV")
    records = []
    for ln in lines[1:]:
        snr, bits, errors, ber, seconds = ln.split(",")
        records.append(BerRecord(float(snr), int(bits), int(errors),
                                 float(ber), float(seconds)))
    return records


def export_results(result: SweepResult, cfg: ExperimentConfig, out_dir,
                   name: str = "results", experiment: str = "sweep",
                   extra_metadata: dict | None = None):
    """Write <name>.csv and <name>.metadata.json; returns their paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    meta_path = os.path.join(out_dir, f"{name}.metadata.json")
    with open(csv_path, "w", newline="") as f:
        f.write(records_to_csv(result.records))
    metadata = {
        "experiment": experiment,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "common_random_numbers": result.crn,
        "reached_min_errors": result.reached_min_errors,
        "records": [r.to_dict() for r in result.records],
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    with open(meta_path, "w") as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, meta_path


def export_constellation(points, out_dir, name: str = "constellation"):
    import os

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.csv")
    with open(path, "w", newline="") as f:
        f.write("i,q\n")
        for p in points:
            f.write(f"{p.real!r},{p.imag!r}\n")
    return path


ROBUSTNESS_HEADER = "snr_db,system,mean_ber,std_ber,unperturbed_ber"


def robustness_to_csv(result: dict) -> str:
    lines = [ROBUSTNESS_HEADER]
    for name in ("learned", "baseline"):
        block = result[name]
        for i, snr in enumerate(result["snr_db"]):
            lines.append(f"{float(snr)!r},{name},{block['mean'][i]!r},"
                         f"{block['std'][i]!r},{block['unperturbed'][i]!r}")
    return "\n".join(lines) + "\n"


def export_robustness(result: dict, config: dict, out_dir, name: str = "robustness"):
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    meta_path = os.path.join(out_dir, f"{name}.metadata.json")
    with open(csv_path, "w", newline="") as f:
        f.write(robustness_to_csv(result))
    with open(meta_path, "w") as f:
        json.dump({"experiment": "robustness", "package_version": __version__,
                   "config": config, "result": result}, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, meta_path


BENCH_HEADER = "length,learned_seconds,mmse_seconds"


def bench_to_csv(result: dict) -> str:
    lines = [BENCH_HEADER]
    for i, n in enumerate(result["lengths"]):
        lines.append(f"{n},{result['learned_seconds'][i]!r},"
                     f"{result['mmse_seconds'][i]!r}")
    return "\n".join(lines) + "\n"


def export_bench(result: dict, config: dict, out_dir, name: str = "bench"):
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    meta_path = os.path.join(out_dir, f"{name}.metadata.json")
    with open(csv_path, "w", newline="") as f:
        f.write(bench_to_csv(result))
    with open(meta_path, "w") as f:
        json.dump({"experiment": "bench", "package_version": __version__,
                   "config": config, "result": result}, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, meta_path


def _run_robustness_from_config(config: dict) -> dict:
    ckpt = Checkpoint.load(config["checkpoint"])
    return robustness_eval(
        ckpt, ChannelSpec.from_dict(config["channel"]), config["snr_grid"],
        perturb_std=config["perturb_std"], n_trials=config["n_trials"],
        seed=config["seed"], qam_cfg=config.get("qam_cfg"),
        trial_max_bits=config["trial_max_bits"],
        trial_min_errors=config["trial_min_errors"],
        chunk_symbols=config["chunk_symbols"])


def reproduce(meta_path, out_dir, name: str = "reproduced"):
    """Re-run an experiment from its metadata; verify the simulated fields
    and re-emit the CSV byte-identically.

    Wall-clock columns are written from the recorded run (they are
    provenance, not re-measured).  The `bench` experiment is measurement
    only, so its CSV is regenerated verbatim from the metadata.
    """
    with open(meta_path) as f:
        metadata = json.load(f)
    experiment = metadata.get("experiment", "sweep")
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")

    if experiment == "robustness":
        fresh = _run_robustness_from_config(metadata["config"])
        if robustness_to_csv(fresh) != robustness_to_csv(metadata["result"]):
            raise SimulationError("robustness reproduction mismatch")
        with open(csv_path, "w", newline="") as f:
            f.write(robustness_to_csv(fresh))
        return csv_path
    if experiment == "bench":
        with open(csv_path, "w", newline="") as f:
            f.write(bench_to_csv(metadata["result"]))
        return csv_path

    cfg = ExperimentConfig.from_dict(metadata["config"])
    if experiment == "sweep":
        result = ber_sweep(cfg)
    elif experiment == "coded-sweep":
        result = ldpc_pipeline(cfg)
    else:
        raise SimulationError(f"experiment kind {experiment!r} is not replayable")
    recorded = [BerRecord.from_dict(d) for d in metadata["records"]]
    if len(recorded) != len(result.records):
        raise SimulationError("reproduction produced a different number of records")
    for fresh, old in zip(result.records, recorded):
        same = (fresh.snr_db == old.snr_db and fresh.bits_sent == old.bits_sent
                and fresh.bit_errors == old.bit_errors and fresh.ber == old.ber)
        if not same:
            raise SimulationError(
                f"reproduction mismatch at snr {old.snr_db}: "
                f"got {fresh.bits_sent} bits / {fresh.bit_errors} errors, "
                f"metadata says {old.bits_sent} / {old.bit_errors}")
        fresh.elapsed_seconds = old.elapsed_seconds
    with open(csv_path, "w", newline="") as f:
        f.write(records_to_csv(result.records))
    return csv_path
