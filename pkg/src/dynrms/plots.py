"""Matplotlib figure helpers for trajectories, mode maps and loop timing.

Used by the bundled report scripts and by tests; the CLI itself only
writes delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from .modal import LinearizedSystem
from .realtime import TimingStats
from .recorder import RecordedTrajectory


def trajectory_figure(traj: RecordedTrajectory, generators: list[str] | None = None):
    """Angle, speed and subtransient-voltage traces per machine."""
    if generators is None:
        generators = sorted({c.split(".")[0] for c in traj.columns
                             if c.endswith(".delta")})
    t = traj.t
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(8, 9))
    panels = [("delta", "rotor angle (rad)"), ("d_omega", "speed deviation (pu)"),
              ("e_d_st", "subtransient e_d (pu)"), ("e_q_st", "subtransient e_q (pu)")]
    for ax, (state, label) in zip(axes, panels):
        for g in generators:
            col = f"{g}.{state}"
            if col in traj.columns:
                ax.plot(t, traj.column(col), label=g, lw=1.0)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0].legend(ncol=min(len(generators), 5), fontsize=8)
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    return fig


def mode_map_figure(lin: LinearizedSystem, f_max: float | None = None):
    """Eigenvalues in the complex plane with damping-ratio guide lines."""
    w = lin.eigenvalues
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(w.real, w.imag, s=18, color="C0", zorder=3)
    lim_im = f_max * 2 * np.pi if f_max else max(1.0, 1.1 * np.abs(w.imag).max())
    lim_re = max(1.0, 1.1 * np.abs(w.real).max())
    for zeta in (0.05, 0.1, 0.2):
        th = np.arctan2(np.sqrt(1 - zeta**2), zeta)
        r = np.linspace(0, np.hypot(lim_re, lim_im), 2)
        ax.plot(-r * np.cos(np.pi - th), r * np.sin(np.pi - th), "k:", lw=0.6)
        ax.plot(-r * np.cos(np.pi - th), -r * np.sin(np.pi - th), "k:", lw=0.6)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlim(-lim_re, max(0.1 * lim_re, 0.5))
    ax.set_ylim(-lim_im, lim_im)
    ax.set_xlabel("Re (1/s)")
    ax.set_ylabel("Im (rad/s)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def timing_figure(stats: TimingStats):
    """Per-step calculation and loop times against the target step size."""
    steps = np.array([r.step for r in stats.records])
    calc = np.array([r.calc_time for r in stats.records]) * 1e3
    loop = np.array([r.loop_time for r in stats.records]) * 1e3
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(steps, loop, color="C0", lw=0.7, label="loop time")
    ax.plot(steps, calc, color="C2", lw=0.7, label="calculation time")
    ax.axhline(stats.dt * 1e3, color="C3", ls="--", lw=1.0, label="step size")
    ax.set_xlabel("step")
    ax.set_ylabel("time (ms)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def save_figure(fig, path: str | Path, dpi: int = 150) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
