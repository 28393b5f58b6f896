"""
Timeline creation

Per bin: the styles most unique to that era (largest lift index), the
topics that Granger-cause them, and the documents that carry those topics
most strongly at that time.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .core import DateBinning, bin_of, bin_start, topic_id, topic_index
from .exceptions import DateRangeError, InputError, TrendCauseError
from .execution import ThreadedExecutor
from .models import CausalTopic, IconicStyle, TimelineEntry, TracedEvent, TrendSeries
from .topic_mining import Corpus, TopicModel, top_words

logger = logging.getLogger(__name__)


def lift_index(style: TrendSeries) -> np.ndarray:
    """x_t / sum_t x_t; sums to 1."""
    values = style.as_array()
    total = values.sum()
    if total <= 0:
        raise InputError(f"Style {style.id}: style never observed")
    return values / total


def _lifts(styles: Sequence[TrendSeries]) -> Dict[str, np.ndarray]:
    lifts = {}
    for style in styles:
        try:
            lifts[style.id] = lift_index(style)
        except InputError as e:
            logger.warning(f"Skipping {e}")
    return lifts


def _rank(lifts: Mapping[str, np.ndarray], bin_index: int, k: int) -> List[IconicStyle]:
    ranked = sorted(lifts.items(), key=lambda item: (-item[1][bin_index], item[0]))
    return [IconicStyle(style_id=sid, lift=float(lift[bin_index])) for sid, lift in ranked[:k]]


def iconic_styles(styles: Sequence[TrendSeries], bin_index: int, k: int) -> List[IconicStyle]:
    """Top-k styles by lift at ``bin_index``; ties by style id.

    Styles that are zero everywhere have no lift and are left out.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    return _rank(_lifts(styles), bin_index, k)


def trace_events(
    topic: int,
    bin_index: int,
    model: TopicModel,
    corpus: Corpus,
    binning: DateBinning,
    n: int,
) -> List[TracedEvent]:
    """The ``n`` documents dated in the bin with the highest weight on ``topic``."""
    if not 0 <= topic < model.n_topics:
        raise InputError(f"Topic {topic} outside [0, {model.n_topics})")
    theta = model.doc_topics_by_id()
    candidates = []
    for doc in corpus.documents:
        try:
            if bin_of(doc.date, binning) != bin_index:
                continue
        except DateRangeError:
            continue
        row = theta.get(doc.doc_id)
        if row is not None:
            candidates.append((float(row[topic]), doc.doc_id, doc.date))

    if not candidates:
        logger.warning(f"No documents in bin {bin_index} to trace topic {topic}")
        return []
    candidates.sort(key=lambda c: (-c[0], c[1]))
    return [TracedEvent(doc_id=doc_id, date=when, score=score, topic_id=topic_id(topic))
            for score, doc_id, when in candidates[:max(0, n)]]


def build_timeline(
    styles: Sequence[TrendSeries],
    influence_map: Mapping[str, Sequence[str]],
    model: TopicModel,
    corpus: Corpus,
    binning: DateBinning,
    k: int = 3,
    n_events: int = 3,
    n_words: int = 5,
    threads: int = 1,
) -> List[TimelineEntry]:
    """One entry per bin: iconic styles, their causal topics and traced events.

    A failure inside a bin is recorded on that entry; the rest of the
    timeline is still built.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    lengths = {len(s) for s in styles}
    if lengths and lengths != {binning.count}:
        raise InputError(f"Style series lengths {sorted(lengths)} do not match {binning.count} bins")
    lifts = _lifts(styles)
    words: Dict[str, List[str]] = {}

    def _causal(tid: str) -> CausalTopic:
        if tid not in words:
            words[tid] = top_words(model, topic_index(tid), n_words)
        return CausalTopic(topic_id=tid, top_words=words[tid])

    def _entry(t: int) -> TimelineEntry:
        entry = TimelineEntry(bin_index=t, bin_start=bin_start(t, binning).isoformat())
        entry.iconic_styles = _rank(lifts, t, k)
        traced = set()
        for iconic in entry.iconic_styles:
            topics: List[CausalTopic] = []
            for tid in influence_map.get(iconic.style_id, []):
                try:
                    topics.append(_causal(tid))
                    if tid not in traced:
                        traced.add(tid)
                        entry.events.extend(trace_events(topic_index(tid), t, model, corpus, binning, n_events))
                except TrendCauseError as e:
                    entry.errors.append(f"{iconic.style_id}/{tid}: {e}")
                    logger.warning(f"Timeline bin {t}: {e}")
            entry.causal_topics[iconic.style_id] = topics
        return entry

    # Warm the top-word cache before fanning out.
    for tid in sorted({tid for tids in influence_map.values() for tid in tids}):
        try:
            _causal(tid)
        except TrendCauseError:
            pass

    entries = ThreadedExecutor(threads, name="timeline").map(_entry, range(binning.count))
    logger.info(f"Timeline: {len(entries)} bins, {sum(len(e.events) for e in entries)} traced events")
    return entries


def timeline_to_dict(entries: Sequence[TimelineEntry], binning: Optional[DateBinning] = None) -> Dict:
    return {
        "binning": binning.to_dict() if binning else None,
        "entries": [e.model_dump(mode="json") for e in entries],
    }
