"""Figure rendering for experiment outputs.

BER curves go on a log-y axis with one labelled line per input CSV; zero-BER
points cannot sit on a log axis, so they are drawn as down-arrow markers at
the 1e-7 floor.  Constellations are scatter plots with a unit-circle guide;
clouds beyond 100k points are seeded-downsampled with a note on the figure.

Figures are written with matplotlib (SVG by default; any savefig extension
works) next to the CSVs they render.  Artists carry stable gids so the SVGs
are machine-checkable.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import SimulationError
from .sweeps import load_records
from .util import rng_stream

BER_FLOOR = 1e-7
DOWNSAMPLE_THRESHOLD = 100_000

matplotlib.rcParams["svg.fonttype"] = "none"  # keep labels as real text


def plot_ber_curves(csv_paths, out_path, labels=None,
                    snr_label="Es/N0 per symbol (dB)", title=None):
    """Render one or more BER sweep CSVs into a single log-y figure."""
    if not csv_paths:
        raise SimulationError("no CSV inputs to plot")
    if labels is None:
        labels = [os.path.splitext(os.path.basename(p))[0] for p in csv_paths]
    fig, ax = plt.subplots(figsize=(7, 5))
    for i, (path, label) in enumerate(zip(csv_paths, labels)):
        records = load_records(path)
        if not records:
            raise SimulationError(f"{path}: no records to plot")
        snr = np.array([r.snr_db for r in records])
        ber = np.array([r.ber for r in records])
        zero = ber == 0
        line, = ax.semilogy(snr[~zero], np.maximum(ber[~zero], BER_FLOOR),
                            marker="o", label=label)
        line.set_gid(f"ber-curve-{i}")
        if np.any(zero):
            # log axis cannot show 0: down-arrows at the floor
            floor = ax.semilogy(snr[zero], np.full(zero.sum(), BER_FLOOR),
                                linestyle="none", marker="v",
                                color=line.get_color())[0]
            floor.set_gid(f"ber-floor-{i}")
    ax.set_xlabel(snr_label)
    ax.set_ylabel("BER")
    ax.set_ylim(bottom=BER_FLOOR / 2)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def load_constellation_csv(path):
    with open(path) as f:
        lines = f.read().strip().split("\n")
    if not lines or lines[0] != "i,q":
        raise SimulationError(f"{path}: not a constellation CSV")
    if len(lines) < 2:
        raise SimulationError(f"{path}: no points to plot")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return data[:, 0] + 1j * data[:, 1]


def plot_constellation(csv_path, out_path, max_points=DOWNSAMPLE_THRESHOLD,
                       seed=0, title=None):
    """Scatter the symbol cloud with a unit-circle guide."""
    points = load_constellation_csv(csv_path)
    note = None
    if points.size > max_points:
        keep = rng_stream(seed, "plot-downsample").choice(
            points.size, size=max_points, replace=False)
        note = f"downsampled to {max_points} of {points.size} points"
        points = points[keep]
    fig, ax = plt.subplots(figsize=(6, 6))
    sc = ax.scatter(points.real, points.imag, s=2, alpha=0.5, linewidths=0)
    sc.set_gid("constellation-points")
    theta = np.linspace(0, 2 * np.pi, 256)
    guide, = ax.plot(np.cos(theta), np.sin(theta), "--", color="gray", lw=1)
    guide.set_gid("unit-circle")
    ax.set_xlabel("in-phase")
    ax.set_ylabel("quadrature")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    if note:
        ax.annotate(note, xy=(0.02, 0.98), xycoords="axes fraction",
                    va="top", fontsize=8).set_gid("downsample-note")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def plot_training_history(history, out_path, title=None):
    """Train/validation loss per epoch."""
    fig, ax = plt.subplots(figsize=(7, 4))
    epochs = np.arange(len(history["train_loss"]))
    ax.plot(epochs, history["train_loss"], marker="o", label="train")
    ax.plot(epochs, history["val_loss"], marker="s", label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("BCE loss")
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
