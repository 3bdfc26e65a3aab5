"""SVG figure emission for CLI reports. Headless (Agg) only."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_line_plot(path, x, series: dict, xlabel: str, ylabel: str,
                   title: str = "") -> None:
    """One SVG line chart; series maps label -> y array."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for label, y in series.items():
        ax.plot(x, y, label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
