"""Figure rendering for the command-line reports.

Every report CSV gets a PNG sibling with the same stem.  Rendering is
best-effort presentation only; the CSVs remain the machine-readable
interface.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def sibling_png(csv_path) -> str:
    root, _ = os.path.splitext(os.fspath(csv_path))
    return root + ".png"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_trace(path, trace: np.ndarray, accepted: np.ndarray):
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = np.arange(len(trace))
    ax.plot(steps, trace, lw=1.0, color="tab:blue")
    kept = np.flatnonzero(accepted)
    ax.plot(kept, np.asarray(trace)[kept], ".", ms=3, color="tab:orange",
            label="accepted steps")
    ax.set_xlabel("step")
    ax.set_ylabel("normalized cost")
    ax.set_title("cost trace")
    ax.legend(loc="upper right")
    _save(fig, path)


def render_prediction(path, times: np.ndarray, z_actual: np.ndarray,
                      z_predicted: np.ndarray, channel_names=None,
                      max_channels: int = 6):
    n = z_actual.shape[0]
    shown = min(n, max_channels)
    fig, axes = plt.subplots(shown, 1, figsize=(8, 1.8 * shown),
                             sharex=True, squeeze=False)
    for i in range(shown):
        ax = axes[i, 0]
        ax.plot(times, z_actual[i], lw=1.0, color="tab:blue", label="actual")
        ax.plot(times, z_predicted[i], lw=1.0, color="tab:orange",
                label="one-step prediction")
        name = channel_names[i] if channel_names else f"c{i + 1}"
        ax.set_ylabel(name)
        if i == 0:
            ax.legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel("time")
    fig.suptitle("one-step predictions")
    _save(fig, path)


def render_pca(path, singular_values: np.ndarray, tails: np.ndarray):
    idx = np.arange(1, len(singular_values) + 1)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.semilogy(idx, singular_values, "o-", ms=4)
    ax1.set_xlabel("component")
    ax1.set_ylabel("singular value")
    ax1.set_title("spectrum")
    ax2.semilogy(idx, np.maximum(tails, 1e-300), "s-", ms=4, color="tab:red")
    ax2.set_xlabel("retained components m")
    ax2.set_ylabel("normalized tail")
    ax2.set_title("reconstruction error")
    _save(fig, path)


def render_sweep(path, rows):
    """rows of (m, r, cost, tail, status); failed fits are skipped."""
    ok = [(m, r, c) for m, r, c, _tail, status in rows if status == "ok"]
    if not ok:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    by_r: dict = {}
    for m, r, c in ok:
        by_r.setdefault(r, []).append((m, c))
    for r, pts in sorted(by_r.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=4,
                label=f"r={r}")
    ax.set_xlabel("dimension m")
    ax.set_ylabel("final normalized cost")
    ax.set_title("order sweep")
    ax.legend()
    _save(fig, path)


def render_seasonal_curves(path, theta, a, b, ybar):
    S = len(theta)
    phases = np.arange(S)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    panels = [("theta", theta), ("a", a[:, 0] if a.ndim == 2 else a),
              ("b", b), ("ybar", ybar)]
    for ax, (name, curve) in zip(axes.ravel(), panels):
        ax.plot(phases, curve, "o-", ms=4)
        ax.set_title(name)
        ax.set_xlabel("phase")
    fig.suptitle("per-phase model parameters")
    _save(fig, path)
