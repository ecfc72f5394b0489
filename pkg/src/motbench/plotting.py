"""PNG figures for evaluation and tuning output.

matplotlib is imported lazily with the Agg backend, so the rest of the
package never touches a display.
"""

from __future__ import annotations

import math


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_frame_errors(rows, path, title: str = "") -> None:
    """Per-frame FP, FN and identity-switch counts from ``per_frame_errors`` rows."""
    plt = _pyplot()
    frames = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(8, 3))
    for col, label in ((1, "FP"), (2, "FN"), (3, "IDsw")):
        ax.step(frames, [r[col] for r in rows], where="mid", label=label, linewidth=1)
    ax.set_xlabel("frame")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_tuning(report, path) -> None:
    """MOTA of every tuning run; the selected run is highlighted."""
    plt = _pyplot()
    idx = [r.index for r in report.runs]
    mota = [r.mota if math.isfinite(r.mota) else float("nan") for r in report.runs]
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(idx, mota, color="0.7")
    best = report.best_index
    ax.bar([best], [mota[best]], color="C0", label=f"best (run {best})")
    ax.set_xlabel("run")
    ax.set_ylabel("MOTA")
    ax.set_title(f"{report.tracker}: {len(idx)} runs")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
