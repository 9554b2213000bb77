"""Render coverage-vs-time figures next to the delimited outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import ComparisonRow, Metrics  # noqa: E402


def plot_metrics(m: Metrics, path: str, title: str = "coverage") -> None:
    """Single-episode coverage and distance curves."""
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    t = [r.time_s for r in m.records]
    ax1.plot(t, [r.coverage for r in m.records], drawstyle="steps-post")
    ax1.axhline(1.0, color="red", linestyle="--", linewidth=0.8)
    ax1.set_ylabel("coverage fraction")
    ax1.set_ylim(0, 1.05)
    ax1.set_title(title)
    ax2.plot(t, [r.distance_m for r in m.records])
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("distance [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_comparison(rows: list[ComparisonRow], path: str,
                    title: str = "coverage comparison") -> None:
    """Mean coverage-vs-time per planner, median dashed."""
    planners: list[str] = []
    for r in rows:
        if r.planner not in planners:
            planners.append(r.planner)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in planners:
        sel = [r for r in rows if r.planner == name]
        t = [r.time_s for r in sel]
        ax.plot(t, [r.mean_coverage for r in sel], label=f"{name} (mean)")
        ax.plot(t, [r.median_coverage for r in sel], linestyle="--",
                linewidth=0.8, label=f"{name} (median)")
    ax.axhline(1.0, color="red", linestyle="--", linewidth=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("coverage fraction")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


__all__ = ["plot_metrics", "plot_comparison"]
