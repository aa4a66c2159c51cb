"""Figure rendering for report commands.

Every report command that writes a delimited table also renders a PNG
next to it. Rendering is kept behind this module so the rest of the
library never imports matplotlib; the Agg backend keeps it headless.
"""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 120


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_curve(path, x, y, xlabel, ylabel, title, rug=None):
    """Single line plot; optional rug of observations along the x axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, lw=1.8)
    if rug is not None and len(rug):
        ymin = np.nanmin(y)
        ymax = np.nanmax(y)
        h = 0.04 * (ymax - ymin if ymax > ymin else 1.0)
        ax.vlines(rug, ymin - h, ymin, lw=0.4, alpha=0.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _finish(fig, path)


def render_bars(path, labels, values, ylabel, title):
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(labels)), 4))
    ax.bar(np.arange(len(labels)), values)
    ax.set_xticks(np.arange(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _finish(fig, path)


def render_survival_curves(path, curves, labels, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve, label in zip(curves, labels):
        ax.step(curve.times, curve.values, where="post", lw=1.5, label=label)
    ax.set_xlabel("time")
    ax.set_ylabel("survival probability")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    if labels and any(labels):
        ax.legend(fontsize=8)
    _finish(fig, path)


def render_prediction_scatter(path, oracle, predicted, title):
    fig, ax = plt.subplots(figsize=(4.6, 4.6))
    ax.scatter(oracle, predicted, s=6, alpha=0.4)
    lo = min(float(np.min(oracle)), float(np.min(predicted)))
    hi = max(float(np.max(oracle)), float(np.max(predicted)))
    ax.plot([lo, hi], [lo, hi], lw=1, color="black", ls="--")
    ax.set_xlabel("oracle survival")
    ax.set_ylabel("predicted survival")
    ax.set_title(title)
    _finish(fig, path)


def render_metric_grid(path, rows, title):
    """One line per (Q, metric) of metric value against n.

    rows: iterable of dicts with keys n, Q, metric, value; values are
    averaged over seeds within each (n, Q, metric) cell.
    """
    cells = {}
    for r in rows:
        key = (int(r["Q"]), r["metric"])
        cells.setdefault(key, {}).setdefault(int(r["n"]), []).append(float(r["value"]))
    metrics = sorted({m for _, m in cells})
    fig, axes = plt.subplots(1, len(metrics), figsize=(5.5 * len(metrics), 4),
                             squeeze=False)
    for ax, metric in zip(axes[0], metrics):
        for (q, m), by_n in sorted(cells.items()):
            if m != metric:
                continue
            ns = sorted(by_n)
            ys = [float(np.mean(by_n[n])) for n in ns]
            ax.plot(ns, ys, marker="o", label=f"Q={q}")
        ax.set_xscale("log")
        ax.set_xlabel("n subjects")
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    _finish(fig, path)
