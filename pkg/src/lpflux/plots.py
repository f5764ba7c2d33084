"""Plot data files and rendered figures for the report command."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_series(path, xs: Sequence[float], ys: Sequence[float]) -> None:
    """Two whitespace-separated numeric columns, one point per line."""
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x!r} {y!r}\n")


def flux_figure(path, qs, total, local, lower, upper, band=None) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.plot(qs, total, "o-", label="total")
    ax.plot(qs, local, "s--", label="local")
    ax.fill_between(qs, lower, upper, alpha=0.2, label="leading-order bracket")
    if band is not None:
        ax.axhspan(band[0], band[1], color="grey", alpha=0.1, label="target band")
    ax.set_xlabel("q")
    ax.set_ylabel("flux")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def besov_figure(path, series: dict) -> None:
    """``series`` maps a label to ``(qs, values)``."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, (qs, vals) in sorted(series.items()):
        ax.plot(qs, vals, "o-", label=label)
    ax.set_xlabel("q")
    ax.set_ylabel("scaled shell norm")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
