"""SVG line plots: element values against time with |R| on a secondary axis."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import element_labels  # noqa: E402

MAX_POINTS = 4000
LOG_DECADES = 3.0


def _thin(n):
    step = max(1, int(np.ceil(n / MAX_POINTS)))
    idx = np.arange(0, n, step)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def wants_log(values) -> bool:
    """True when the positive samples span at least three decades."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v) & (v > 0)]
    if v.size == 0 or np.any(np.asarray(values) < 0):
        return False
    return np.log10(v.max() / v.min()) >= LOG_DECADES


def trajectory_svg(trajectory, series=None, title: str = "") -> str:
    idx = _thin(len(trajectory.times))
    t = trajectory.times[idx]
    x = trajectory.states[idx]
    with plt.rc_context({"svg.hashsalt": "symcycle", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(9, 4.5))
        for j, label in enumerate(element_labels(x.shape[1])):
            ax.plot(t, x[:, j], lw=1.0, label=label)
        if wants_log(x):
            ax.set_yscale("log")
        ax.set_xlabel("t (s)")
        ax.set_ylabel("element value")
        handles, labels = ax.get_legend_handles_labels()
        if series is not None:
            r = series.abs_r[idx]
            ax2 = ax.twinx()
            (line,) = ax2.plot(t, r, color="black", lw=1.2, ls="--", label="|R|")
            pos = r[r > 0]
            if pos.size and np.log10(pos.max() / pos.min()) >= LOG_DECADES:
                ax2.set_yscale("log")
            ax2.set_ylabel("on-road energy |R|")
            handles.append(line)
            labels.append("|R|")
        ax.legend(handles, labels, loc="upper right", fontsize=8, ncol=2)
        if title:
            ax.set_title(title, fontsize=10)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
