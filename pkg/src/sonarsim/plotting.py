"""Matplotlib figures written next to the frame and report files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "figure.dpi": 110,
    "savefig.bbox": "tight",
}


def _figure(width=6.0, height=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden))


def plot_frame(frame, image, path, title=None):
    """Polar frame (beams x bins) beside its fan-shaped Cartesian rendering."""
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
        bearings = np.degrees(frame.bearings)
        extent = [frame.range_min, frame.range_max, bearings[0], bearings[-1]]
        ax0.imshow(frame.intensities, origin="lower", aspect="auto", cmap="copper",
                   extent=extent, vmin=0, vmax=1, interpolation="nearest")
        ax0.set_xlabel("range (m)")
        ax0.set_ylabel("bearing (deg)")
        ax0.set_title("polar")
        if image is not None:
            ax1.imshow(image.pixels, cmap="copper", vmin=0, vmax=1, interpolation="nearest")
            ax1.set_title("cartesian")
        ax1.set_axis_off()
        if title:
            fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)


def plot_shader(shader, path):
    """Pulse distance and echo intensity of the shader image."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(10, 3))
        dist = np.where(np.isfinite(shader.distance), shader.distance, np.nan)
        im = axes[0].imshow(dist, cmap="Blues_r", aspect="auto")
        fig.colorbar(im, ax=axes[0], label="pulse distance (m)")
        im = axes[1].imshow(shader.intensity, cmap="Greens_r", vmin=0, vmax=1, aspect="auto")
        fig.colorbar(im, ax=axes[1], label="echo intensity")
        for ax in axes:
            ax.set_axis_off()
        fig.savefig(path)
        plt.close(fig)


def plot_benchmark(report, path):
    """Average frame time with one-sigma bars per configuration."""
    rows = report.rows
    with plt.rc_context(STYLE):
        fig, ax = _figure(max(4.0, 0.8 * len(rows) + 2))
        x = np.arange(len(rows))
        ax.bar(x, [r.avg_time_ms for r in rows], yerr=[r.std_dev_ms for r in rows],
               color="0.6", edgecolor="k", capsize=3)
        ax.set_xticks(x)
        ax.set_xticklabels([r.setup for r in rows], rotation=45, ha="right")
        ax.set_ylabel("avg. time per frame (ms)")
        for xi, r in zip(x, rows):
            ax.annotate(f"{r.frame_rate_fps:.1f} fps", (xi, r.avg_time_ms), ha="center",
                        va="bottom", fontsize=7, xytext=(0, 3), textcoords="offset points")
        fig.savefig(path)
        plt.close(fig)
