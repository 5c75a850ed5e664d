"""Render report figures (PNG) from the tidy aggregated rows."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "ppo": dict(color="tab:blue", marker="o"),
    "qlearning": dict(color="tab:orange", marker="s"),
    "greedy": dict(color="tab:green", marker="^"),
}


def _series(rows, metric_idx, err_idx):
    """Group PLOT_HEADER rows into {(algorithm, csit): (x, y, err)}."""
    series = {}
    for row in rows:
        key = (row[0], row[1])
        series.setdefault(key, []).append(
            (float(row[3]), float(row[metric_idx]), float(row[err_idx]))
        )
    out = {}
    for key, pts in series.items():
        pts.sort()
        arr = np.asarray(pts)
        out[key] = (arr[:, 0], arr[:, 1], arr[:, 2])
    return out


def _label(algorithm, csit):
    name = {"ppo": "PPO", "qlearning": "Q-learning", "greedy": "Greedy"}.get(
        algorithm, algorithm
    )
    return f"{name} ({csit} CSIT)"


def plot_learning_curves(rows, out_path, smooth=20) -> Path:
    """Mean episode reward vs. episode, one line per (algorithm, csit)."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for (alg, csit), (x, y, _) in sorted(_series(rows, 4, 5).items()):
        if smooth > 1 and len(y) > smooth:
            kernel = np.ones(smooth) / smooth
            y = np.convolve(y, kernel, mode="valid")
            x = x[: len(y)]
        style = _STYLE.get(alg, {})
        ax.plot(x, y, label=_label(alg, csit), color=style.get("color"), lw=1.4)
    ax.set_xlabel("training episode")
    ax.set_ylabel("mean episode reward")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_sweep(rows, out_path, x_label, metric="sum_rate") -> Path:
    """Mean metric vs. the sweep variable with stderr bars."""
    idx = (6, 7) if metric == "sum_rate" else (4, 5)
    fig, ax = plt.subplots(figsize=(5.2, 4))
    for (alg, csit), (x, y, err) in sorted(_series(rows, *idx).items()):
        style = _STYLE.get(alg, {})
        ax.errorbar(
            x,
            y,
            yerr=err,
            label=_label(alg, csit),
            capsize=3,
            lw=1.4,
            **style,
        )
    ax.set_xlabel(x_label)
    ax.set_ylabel(
        "average sum-rate (bps/Hz)" if metric == "sum_rate" else "average reward"
    )
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)
