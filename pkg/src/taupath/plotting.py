"""PNG figures for sweeps and method comparisons."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import SensitivityEstimate  # noqa: E402


def _values(rows, name):
    return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows],
                    dtype=float)


def plot_sweep(rows: Sequence[SensitivityEstimate], axis: str, values: Sequence[float],
               path: str | Path) -> Path:
    """RE, RSD and RSDCC against the swept quantity."""
    x = np.asarray(values, dtype=float)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    for ax, name, label in zip(axes, ("re_percent", "rsd", "rsdcc_seconds"),
                               ("RE (%)", "RSD", "RSDCC (s)")):
        y = _values(rows, name)
        ax.plot(x, y, "o-")
        ax.set_xlabel(axis)
        ax.set_ylabel(label)
        if axis in ("volume", "m0"):
            ax.set_xscale("log", base=2)
        if name != "re_percent" and np.all(y[np.isfinite(y)] > 0):
            ax.set_yscale("log")
        ax.grid(alpha=0.3)
    method = rows[0].method if rows else ""
    fig.suptitle(f"{method} sweep over {axis}")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_methods(rows: Sequence[SensitivityEstimate], path: str | Path,
                 title: str = "") -> Path:
    """Grouped bars of RE (left axis) and RSDCC (right axis, log) per method and parameter."""
    params = list(dict.fromkeys(r.param for r in rows))
    methods = list(dict.fromkeys(r.method for r in rows))
    fig, (ax_re, ax_cc) = plt.subplots(1, 2, figsize=(12, 3.8))
    width = 0.8 / max(len(methods), 1)
    pos = np.arange(len(params))
    for i, m in enumerate(methods):
        sel = {r.param: r for r in rows if r.method == m}
        re = [np.nan if sel.get(p) is None or sel[p].re_percent is None else sel[p].re_percent
              for p in params]
        cc = [np.nan if sel.get(p) is None or sel[p].rsdcc_seconds is None
              else sel[p].rsdcc_seconds for p in params]
        ax_re.bar(pos + i * width, re, width, label=m)
        ax_cc.bar(pos + i * width, cc, width, label=m)
    for ax, label in ((ax_re, "RE (%)"), (ax_cc, "RSDCC (s)")):
        ax.set_xticks(pos + width * (len(methods) - 1) / 2, params)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3, axis="y")
    ax_cc.set_yscale("log")
    ax_re.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
