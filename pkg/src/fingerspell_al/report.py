"""Learning-curve and per-class gap figures, written as deterministic SVG."""

from __future__ import annotations

from itertools import cycle
from typing import Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .engine import ExperimentResult, GapReport

# fixed ids and no date stamp keep the SVG byte-identical between runs
SVG_RC = {
    "svg.hashsalt": "fingerspell-al",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "axes.spines.top": False,
    "axes.spines.right": False,
}

SERIES_COLORS = {"variation_ratio": "#1f5fbf", "random": "#e0b000"}
OTHER_COLORS = ["#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"]
SHARED_COLOR = "#d62728"


class ReportError(ValueError):
    pass


def _check_same_corpus(results: Sequence[ExperimentResult]) -> None:
    if not results:
        raise ReportError("need at least one result")
    names = {(r.corpus_name, tuple(r.alphabet)) for r in results}
    if len(names) > 1:
        raise ReportError(f"results come from different corpora: {sorted(n for n, _ in names)}")


def curve_series(result: ExperimentResult):
    """(labels acquired, mean, min, max) accuracy per round across seeds."""
    n_rounds = min(len(run.rounds) for run in result.runs)
    acc = np.array([[run.rounds[t].test_accuracy for t in range(n_rounds)] for run in result.runs])
    x = np.array(
        [np.mean([run.rounds[t].labeled_count for run in result.runs]) for t in range(n_rounds)]
    )
    return x, acc.mean(axis=0), acc.min(axis=0), acc.max(axis=0)


def learning_curve_figure(results: Sequence[ExperimentResult], title: Optional[str] = None) -> Figure:
    _check_same_corpus(results)
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(1, 1, 1)
    others = cycle(OTHER_COLORS)
    for i, r in enumerate(results):
        fn = r.config.acquisition.function
        color = SERIES_COLORS.get(fn) or next(others)
        x, mean, lo, hi = curve_series(r)
        if len(r.runs) > 1:
            band = ax.fill_between(x, lo, hi, color=color, alpha=0.2, linewidth=0)
            band.set_gid(f"band-{i}")
        (line,) = ax.plot(x, mean, color=color, linewidth=1.8, marker="o", markersize=3, label=r.config.name)
        line.set_gid(f"series-{i}")
    ax.set_xlabel("labels acquired")
    ax.set_ylabel("test accuracy")
    ax.set_title(title or results[0].corpus_name)
    ax.grid(True, color="#dddddd", linewidth=0.6)
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    return fig


def gap_chart_figure(report: GapReport) -> Figure:
    """Grouped per-letter accuracy bars, plus a gap panel when comparing configs.

    Letters shared with a configuration's pre-training source get red tick
    labels.
    """
    letters = report.alphabet
    n = len(report.labels)
    x = np.arange(len(letters))
    with_gaps = n > 1
    fig = Figure(figsize=(max(6.4, 0.42 * len(letters) + 1.5), 5.6 if with_gaps else 3.6))
    axes = fig.subplots(2 if with_gaps else 1, 1, sharex=True, squeeze=False)[:, 0]
    ax = axes[0]
    width = 0.8 / n
    colors = cycle(["#2ca02c", "#1f5fbf", "#e377c2", "#e0b000", "#9467bd", "#8c564b"])
    palette = {}
    for i, label in enumerate(report.labels):
        palette[label] = next(colors)
        heights = [np.nan if report.accuracy[label][c] is None else report.accuracy[label][c] for c in letters]
        bars = ax.bar(x - 0.4 + width * (i + 0.5), heights, width, color=palette[label], label=label)
        for j, bar in enumerate(bars):
            bar.set_gid(f"acc-{i}-{letters[j]}")
    ax.set_ylabel(f"accuracy at round {report.round}")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower right", frameon=False, fontsize=8)
    ax.set_title(f"{report.target}: per-letter accuracy")

    if with_gaps:
        gx = axes[1]
        m = n - 1
        gwidth = 0.8 / m
        for j, label in enumerate(report.labels[1:]):
            heights = [0.0 if report.gaps[label][c] is None else report.gaps[label][c] for c in letters]
            bars = gx.bar(x - 0.4 + gwidth * (j + 0.5), heights, gwidth, color=palette[label], label=label)
            for b, bar in enumerate(bars):
                bar.set_gid(f"gap-{j}-{letters[b]}")
        gx.axhline(0.0, color="black", linewidth=0.8)
        gx.set_ylabel(f"gap vs {report.labels[0]}")

    bottom = axes[-1]
    bottom.set_xticks(x)
    bottom.set_xticklabels(letters)
    shared_any = {c for flags in report.shared.values() for c, s in flags.items() if s}
    for tick, letter in zip(bottom.get_xticklabels(), letters):
        if letter in shared_any:
            tick.set_color(SHARED_COLOR)
    bottom.set_xlabel("letter (red: shared with pre-training source)" if shared_any else "letter")
    fig.tight_layout()
    return fig


def save_svg(fig: Figure, path) -> None:
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})


def render_learning_curves(results: Sequence[ExperimentResult], path, title: Optional[str] = None) -> Figure:
    with matplotlib.rc_context(SVG_RC):
        fig = learning_curve_figure(results, title)
        save_svg(fig, path)
    return fig


def render_gap_chart(report: GapReport, path) -> Figure:
    with matplotlib.rc_context(SVG_RC):
        fig = gap_chart_figure(report)
        save_svg(fig, path)
    return fig
