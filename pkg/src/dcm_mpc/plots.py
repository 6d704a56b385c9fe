"""Report figures rendered next to the CSV exports.

All functions take a finished artifact (SimLog, comparison rows or a
RecoveryEnvelope) and write a PNG; nothing here feeds back into the
controller or simulator.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .simulator import RecoveryEnvelope, SimLog


def plot_top_view(log: SimLog, path: str | Path) -> Path:
    """Ground-plane view: footholds, CoM, DCM, CoP and CMP paths."""
    sc = log.scenario
    fig, ax = plt.subplots(figsize=(8, 5))
    for i, (fx, fy) in enumerate(log.footholds_final):
        ax.add_patch(
            Rectangle(
                (fx - sc.half_length, fy - sc.half_width),
                2 * sc.half_length,
                2 * sc.half_width,
                fill=False,
                edgecolor="gray",
                linewidth=1.0,
            )
        )
        ax.annotate(str(i), (fx, fy), ha="center", va="center", fontsize=8, color="gray")
    nom = log.nominal_footholds
    if nom is not None:
        ax.plot(nom[:, 0], nom[:, 1], "x", color="lightgray", label="nominal footholds")
    ax.plot(log.com[:, 0], log.com[:, 1], label="CoM")
    ax.plot(log.dcm[:, 0], log.dcm[:, 1], label="DCM")
    ax.plot(log.cop[:, 0], log.cop[:, 1], label="CoP")
    if (log.cmp != log.cop).any():
        ax.plot(log.cmp[:, 0], log.cmp[:, 1], "--", label="CMP")
    pushed = log.push_active.astype(bool)
    if pushed.any():
        ax.plot(log.com[pushed, 0], log.com[pushed, 1], "r.", markersize=3, label="push active")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"{sc.name}: {log.outcome}")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_time_series(log: SimLog, path: str | Path) -> Path:
    """Per-axis DCM/CoP/CMP traces plus momentum rate and CoM height."""
    fig, axes = plt.subplots(4, 1, figsize=(9, 10), sharex=True)
    for axis, name in ((0, "x"), (1, "y")):
        ax = axes[axis]
        ax.plot(log.t, log.dcm[:, axis], label="DCM")
        ax.plot(log.t, log.cop[:, axis], label="CoP")
        if (log.cmp != log.cop).any():
            ax.plot(log.t, log.cmp[:, axis], "--", label="CMP")
        ax.plot(log.t, log.com[:, axis], alpha=0.6, label="CoM")
        ax.set_ylabel(f"{name} (m)")
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, alpha=0.3)
    axes[2].plot(log.t, log.hdot[:, 0], label=r"$\dot H_x$")
    axes[2].plot(log.t, log.hdot[:, 1], label=r"$\dot H_y$")
    axes[2].set_ylabel("momentum rate (N m)")
    axes[2].legend(loc="best", fontsize=8)
    axes[2].grid(True, alpha=0.3)
    axes[3].plot(log.t, log.com_z, color="tab:green")
    axes[3].set_ylabel("CoM height (m)")
    axes[3].set_xlabel("t (s)")
    axes[3].grid(True, alpha=0.3)
    if log.push_active.any():
        on = log.t[log.push_active.astype(bool)]
        for ax in axes:
            ax.axvspan(on.min(), on.max(), color="red", alpha=0.15)
    fig.suptitle(f"{log.scenario.name}: {log.outcome}")
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_comparison(rows: list, path: str | Path) -> Path:
    """Bar chart of per-mode recoverable-push envelopes."""
    modes = [r["mode"] for r in rows]
    fwd = [r["envelope_forward"] for r in rows]
    lat = [r["envelope_lateral"] for r in rows]
    x = range(len(modes))
    width = 0.38
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([i - width / 2 for i in x], fwd, width, label="forward")
    ax.bar([i + width / 2 for i in x], lat, width, label="lateral")
    ax.set_xticks(list(x))
    ax.set_xticklabels(modes)
    ax.set_ylabel("max recoverable push (N)")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_envelope(env: RecoveryEnvelope, path: str | Path) -> Path:
    """Bisection trace: evaluated magnitudes and the resulting envelope."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, (mag, ok) in enumerate(env.trace):
        ax.plot(i, mag, "o", color="tab:green" if ok else "tab:red")
    ax.axhline(env.magnitude, linestyle="--", color="gray", label=f"envelope = {env.magnitude:.1f} N")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("push magnitude (N)")
    ax.set_title(
        f"direction ({env.direction[0]:.2f}, {env.direction[1]:.2f}), "
        f"duration {env.duration:.2f} s"
    )
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
