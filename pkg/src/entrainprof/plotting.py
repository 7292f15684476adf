"""SVG figures for entrainment profiles and condensed probabilities."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .entrain import MEASURES, PROFILE_CONDITIONS  # noqa: E402
from .features import FEATURE_NAMES, feature_set, short_name  # noqa: E402
from .stats.harvest import COLUMNS  # noqa: E402

# fixed ids and no timestamp keep repeated renders byte-identical
_RC = {"svg.hashsalt": "entrainprof", "svg.fonttype": "none", "font.size": 8}
_META = {"Date": None, "Creator": None}
_STYLE = {"a_d_f": ("tab:red", "-"), "a_d_m": ("tab:blue", "-"),
          "a_f_f": ("tab:orange", "-"), "a_f_m": ("tab:cyan", "-"),
          "a": ("black", "-"), "na": ("grey", "--"), "u": ("grey", ":")}
_STACK = {"prox": "#2b6ca3", "sync": "#7fb2dd", "-prox": "#b8412c", "-sync": "#eaa08f"}


def _save(fig, path) -> None:
    fig.savefig(Path(path), format="svg", metadata=_META)
    plt.close(fig)


def plot_profile(rows, set_name: str, path) -> None:
    """Line profile of mean distances for the features of one set.

    Features run down the y axis; each condition is one polyline.
    """
    names = [n for n in FEATURE_NAMES if feature_set(n) == set_name]
    means = {(r.feature, r.measure, r.condition): r.mean for r in rows}
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(7, 1.2 + 0.3 * len(names)), sharey=True)
        y = list(range(len(names)))
        for ax, measure in zip(axes, MEASURES):
            for cond in PROFILE_CONDITIONS:
                x = [means.get((n, measure, cond), math.nan) for n in names]
                color, ls = _STYLE[cond]
                ax.plot(x, y, ls, color=color, marker="o", ms=3, lw=1, label=cond)
            ax.set_title(measure)
            ax.set_xlabel("mean distance")
            ax.grid(True, lw=0.3)
        axes[0].set_yticks(y, [short_name(n) for n in names])
        axes[0].invert_yaxis()
        axes[1].legend(loc="best", fontsize=6, frameon=False)
        fig.suptitle(set_name)
        fig.tight_layout()
        _save(fig, path)


def plot_condensed(cells_by_level: dict, grouping: str, path) -> None:
    """Stacked bars of condensed probabilities, one panel per level."""
    levels = list(cells_by_level)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(levels), figsize=(3.6 * len(levels), 3),
                                 sharey=True, squeeze=False)
        for ax, level in zip(axes[0], levels):
            cells = cells_by_level[level]
            groups = list(dict.fromkeys(c.group for c in cells))
            prob = {(c.group, c.column): c.probability for c in cells}
            bottom = [0.0] * len(groups)
            for col in COLUMNS:
                h = [float(prob[(g, col)] or 0) for g in groups]
                ax.bar(range(len(groups)), h, bottom=bottom, color=_STACK[col], label=col,
                       width=0.7)
                bottom = [b + v for b, v in zip(bottom, h)]
            ax.set_xticks(range(len(groups)), groups, rotation=45, ha="right")
            ax.set_title(level)
        axes[0][0].set_ylabel("probability")
        axes[0][-1].legend(fontsize=6, frameon=False)
        fig.tight_layout()
        _save(fig, path)
