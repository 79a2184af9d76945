"""Static SVG plots for rollout evaluation reports.

All functions render straight to a file with the non-interactive Agg
backend; nothing here opens a window. Curves with invalid (NaN) instants
simply leave gaps.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .rollout import MetricReport

__all__ = ["angle_curves", "polar_load_plot", "rmse_curves"]

_COLORS = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#e67e22", "#2c3e50")


def _color(i: int) -> str:
    return _COLORS[i % len(_COLORS)]


def rmse_curves(path: str, reports: dict[str, MetricReport]) -> None:
    """Position and force RMSE against rollout time, one line per model."""
    fig, (ax_pos, ax_force) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    for i, (name, rep) in enumerate(reports.items()):
        ax_pos.plot(rep.t, rep.position_rmse, label=name, color=_color(i), lw=1.4)
        ax_force.plot(rep.t, rep.force_rmse, label=name, color=_color(i), lw=1.4)
        if rep.summary.get("diverged_at") is not None:
            ax_pos.axvline(rep.t[-1], color=_color(i), ls=":", lw=0.9)
    ax_pos.set_xlabel("time [s]")
    ax_pos.set_ylabel("roller position RMSE [m]")
    ax_force.set_xlabel("time [s]")
    ax_force.set_ylabel("contact force RMSE [N]")
    ax_force.legend(frameon=False, fontsize=8)
    for ax in (ax_pos, ax_force):
        ax.grid(alpha=0.25, lw=0.5)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def angle_curves(path: str, reports: dict[str, MetricReport]) -> None:
    """Binned force RMSE against cumulative shaft rotation."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for i, (name, rep) in enumerate(reports.items()):
        centers = 0.5 * (rep.angle_bin_edges[:-1] + rep.angle_bin_edges[1:])
        ax.plot(
            centers, rep.angle_bin_rmse, label=name, color=_color(i),
            lw=1.4, marker="o", ms=3,
        )
    ax.set_xlabel("cumulative shaft rotation [rad]")
    ax.set_ylabel("contact force RMSE [N]")
    ax.grid(alpha=0.25, lw=0.5)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def polar_load_plot(path: str, snapshots: dict[str, dict]) -> None:
    """Per-roller outer-ring load magnitudes on polar axes.

    ``snapshots`` maps model names to the dicts produced by
    ``rollout.polar_forces``; the ground truth from the first snapshot is
    drawn once as a filled reference.
    """
    if not snapshots:
        raise ValueError("need at least one snapshot to plot")
    fig, ax = plt.subplots(figsize=(4.6, 4.6), subplot_kw={"projection": "polar"})
    first = next(iter(snapshots.values()))
    az_t, mag_t = _closed(first["azimuth_true"], first["magnitude_true"])
    ax.plot(az_t, mag_t, color="0.3", lw=1.2, label="reference")
    ax.fill(az_t, mag_t, color="0.3", alpha=0.12)
    for i, (name, snap) in enumerate(snapshots.items()):
        if not snap["force_valid"]:
            continue
        az, mag = _closed(snap["azimuth_pred"], snap["magnitude_pred"])
        ax.plot(az, mag, color=_color(i), lw=1.3, label=name)
    ax.set_title(f"roller load on outer ring, t = {first['t']:.4f} s", fontsize=9)
    ax.legend(frameon=False, fontsize=8, loc="lower left", bbox_to_anchor=(0.9, 0.9))
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _closed(azimuth: np.ndarray, magnitude: np.ndarray):
    """Sort rollers by azimuth and close the loop for a polar polygon."""
    order = np.argsort(azimuth)
    az = np.concatenate([azimuth[order], azimuth[order][:1] + 2 * np.pi])
    mag = np.concatenate([magnitude[order], magnitude[order][:1]])
    return az, mag
