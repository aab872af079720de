"""PNG renderings of the figure-like reports.

Files are written with the Agg backend and without the software-version
metadata tag, so identical inputs give byte-identical images.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .labeling import WEEKDAYS, BucketRow, WeekdayRow  # noqa: E402
from .learn import MarginProfile  # noqa: E402

COLORS = {"below": "#4c72b0", "on-target": "#bbbbbb", "above": "#c44e52"}


def _save(fig, path: str | os.PathLike) -> None:
    fig.savefig(path, format="png", dpi=100, metadata={"Software": None})
    plt.close(fig)


def _stacked(ax, labels: Sequence[str], below, on, above) -> None:
    x = np.arange(len(labels))
    below, on, above = (100 * np.asarray(v, dtype=float) for v in (below, on, above))
    ax.bar(x, below, color=COLORS["below"], label="Below")
    ax.bar(x, on, bottom=below, color=COLORS["on-target"], label="On target")
    ax.bar(x, above, bottom=below + on, color=COLORS["above"], label="Above")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=60 if len(labels) > 10 else 0, fontsize=8)
    ax.set_ylim(0, 100)
    ax.set_ylabel("% of days")
    ax.legend(loc="lower center", bbox_to_anchor=(0.5, 1.0), ncol=3, fontsize=8, frameon=False)


def plot_margin_profile(profile: MarginProfile, path: str | os.PathLike) -> None:
    """Day-label mix by distance-to-boundary percentile group, with mean days on a twin axis."""
    g = profile.groups
    fig, ax = plt.subplots(figsize=(9, 4.5))
    _stacked(ax, [x.label for x in g], [x.below for x in g], [x.on_target for x in g],
             [x.above for x in g])
    ax.set_xlabel("users ordered by signed distance to the decision boundary")
    twin = ax.twinx()
    twin.plot(np.arange(len(g)), [x.mean_days for x in g], color="black", marker="o", lw=1)
    twin.set_ylabel("mean labeled days")
    fig.tight_layout()
    _save(fig, path)


def plot_buckets(rows: Sequence[BucketRow], path: str | os.PathLike) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    _stacked(ax, [r.label for r in rows], [r.below for r in rows], [r.on_target for r in rows],
             [r.above for r in rows])
    ax.set_ylabel("% of users")
    ax.set_xlabel("portion of diary lifetime")
    fig.tight_layout()
    _save(fig, path)


def plot_weekly_trend(rows: Sequence[WeekdayRow], path: str | os.PathLike) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(rows))
    for attr, name in (("above", "Above"), ("on_target", "On target"), ("below", "Below")):
        key = {"above": "above", "on_target": "on-target", "below": "below"}[attr]
        ax.plot(x, [getattr(r, attr) for r in rows], marker="o", color=COLORS[key], label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(WEEKDAYS[: len(rows)])
    ax.set_ylabel("% of labeled days")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
