"""
SVG charts

Static renderings of trend series, forecasts and timelines with the agg
backend. Output is byte-stable across runs: fixed hash salt, no date
metadata, text kept as <text> elements. Every plotted series is wrapped in
a group with id ``series-<name>``.
"""

import logging
import threading
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("agg")

from matplotlib.figure import Figure  # noqa: E402

from .exceptions import InputError  # noqa: E402
from .models import TimelineEntry, TrendSeries  # noqa: E402

logger = logging.getLogger(__name__)

# matplotlib is not thread safe
_lock = threading.Lock()

_RC = {
    "svg.hashsalt": "trendcause",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
}

PathLike = Union[str, Path]


def _save(fig: Figure, path: PathLike) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_RC):
        fig.savefig(p, format="svg", metadata={"Date": None})
    logger.info(f"Wrote chart {p}")
    return p


def _tick_labels(ax, count: int, x_labels: Optional[Sequence[str]]):
    if not x_labels:
        ax.set_xlabel("bin")
        return
    step = max(1, count // 10)
    ticks = list(range(0, count, step))
    ax.set_xticks(ticks)
    ax.set_xticklabels([x_labels[t] for t in ticks], rotation=45, ha="right")
    ax.set_xlabel("bin start")


def emit_chart(
    series: Sequence[TrendSeries],
    path: PathLike,
    predictions: Optional[Mapping[str, Sequence[float]]] = None,
    start: int = 0,
    x_labels: Optional[Sequence[str]] = None,
    title: str = "",
) -> Path:
    """Line chart of ``series`` from bin 0 and ``predictions`` from bin ``start``.

    Example (train / truth / two forecasts):
        emit_chart([train], "style_3.svg", start=80,
                   predictions={"truth": truth, "ar": ar_pred, "cultural": cul_pred})

    A prediction named "truth" is drawn solid, the others dashed.
    """
    predictions = dict(predictions or {})
    if not series and not predictions:
        raise InputError("Nothing to chart")
    for s in series:
        if len(s) == 0:
            raise InputError(f"Series {s.id} is empty")
    for name, values in predictions.items():
        if len(values) == 0:
            raise InputError(f"Prediction {name} is empty")

    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(8, 4.5))
        ax = fig.add_subplot(111)
        count = 0
        for s in series:
            line, = ax.plot(range(len(s)), s.values, label=s.id)
            line.set_gid(f"series-{s.id}")
            count = max(count, len(s))
        for name, values in predictions.items():
            xs = range(start, start + len(values))
            line, = ax.plot(xs, list(values), linestyle="-" if name == "truth" else "--", label=name)
            line.set_gid(f"series-{name}")
            count = max(count, start + len(values))
        _tick_labels(ax, count, x_labels)
        ax.set_ylabel("popularity")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left")
        fig.tight_layout()
        return _save(fig, path)


def emit_style_stack(
    styles: Sequence[TrendSeries],
    path: PathLike,
    top: int = 10,
    x_labels: Optional[Sequence[str]] = None,
) -> Path:
    """Stacked popularity of the ``top`` styles with the largest mean share."""
    if not styles:
        raise InputError("Nothing to chart")
    ranked = sorted(styles, key=lambda s: (-sum(s.values) / max(1, len(s)), s.id))[:max(1, top)]
    T = len(ranked[0])
    if T == 0 or any(len(s) != T for s in ranked):
        raise InputError("Stacked styles must be non-empty and equally long")

    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(10, 5))
        ax = fig.add_subplot(111)
        polys = ax.stackplot(range(T), *[s.values for s in ranked], labels=[s.id for s in ranked])
        for poly, s in zip(polys, ranked):
            poly.set_gid(f"series-{s.id}")
        _tick_labels(ax, T, x_labels)
        ax.set_ylabel("popularity")
        ax.set_xlim(0, max(1, T - 1))
        ax.legend(loc="upper left", fontsize="small", ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def emit_timeline_chart(entries: Sequence[TimelineEntry], path: PathLike, words: int = 3) -> Path:
    """Strip chart: one band per bin listing iconic styles and causal-topic words."""
    if not entries:
        raise InputError("Timeline has no entries")

    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(max(8.0, 1.6 * len(entries)), 4))
        ax = fig.add_subplot(111)
        ax.set_xlim(0, len(entries))
        ax.set_ylim(0, 1)
        ax.set_yticks([])
        for i, entry in enumerate(entries):
            band = ax.axvspan(i, i + 1, color="#dddddd" if i % 2 else "#f5f5f5")
            band.set_gid(f"era-{entry.bin_index}")
            lines: List[str] = []
            for iconic in entry.iconic_styles:
                lines.append(iconic.style_id)
                for topic in entry.causal_topics.get(iconic.style_id, []):
                    lines.append("  " + " ".join(topic.top_words[:words]))
            ax.text(i + 0.05, 0.95, "\n".join(lines), va="top", ha="left", fontsize=7)
        ax.set_xticks([i + 0.5 for i in range(len(entries))])
        ax.set_xticklabels([e.bin_start for e in entries], rotation=45, ha="right", fontsize=7)
        fig.tight_layout()
        return _save(fig, path)
