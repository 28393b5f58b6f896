"""
Core trend construction

Date parsing and binning plus the two popularity series every other
module consumes:

- style trends: fraction of a bin's assigned instances that carry each style
- topic trends: normalized topic mass over all documents dated in a bin

Bins are half-open intervals [origin + k*width, origin + (k+1)*width).
Empty bins produce zeros and are flagged in ``TrendSet.empty_bins``.
"""

import calendar
import logging
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigError, DateRangeError, InputError
from .models import InstanceRecord, StyleAssignment, TrendKind, TrendSeries

logger = logging.getLogger(__name__)

DateLike = Union[str, int, date]

_YEAR = re.compile(r"^(\d{4})$")
_YEAR_MONTH = re.compile(r"^(\d{4})-(\d{2})$")
_FULL_DATE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})(?:[T ].*)?$")


def parse_date(label: DateLike) -> date:
    """Resolve an ISO-8601 date label.

    Year-only labels map to January 1 and year-month labels to the first
    of the month. Decade labels and free text are rejected.
    """
    if isinstance(label, date):
        return label
    text = str(label).strip()
    try:
        m = _FULL_DATE.match(text)
        if m:
            return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
        m = _YEAR_MONTH.match(text)
        if m:
            return date(int(m.group(1)), int(m.group(2)), 1)
        m = _YEAR.match(text)
        if m:
            return date(int(m.group(1)), 1, 1)
    except ValueError as e:
        raise DateRangeError(f"Invalid date {text!r}: {e}", date=text) from e
    raise DateRangeError(f"Unresolvable date label {text!r}", date=text)


# ==================== Binning ====================

class BinUnit(str, Enum):
    DAYS = "days"
    MONTHS = "months"
    YEARS = "years"


@dataclass(frozen=True)
class DateBinning:
    """Evenly spaced date bins starting at ``origin``.

    Example (five-year bins over the twentieth century):
        DateBinning(origin="1900", width=5, count=20, unit="years")
    """
    origin: date
    width: int
    count: int
    unit: BinUnit = BinUnit.YEARS

    def __post_init__(self):
        object.__setattr__(self, "origin", parse_date(self.origin))
        try:
            object.__setattr__(self, "unit", BinUnit(self.unit))
        except ValueError as e:
            raise ConfigError(f"Unknown bin unit {self.unit!r}") from e
        if int(self.width) <= 0:
            raise ConfigError("bin width must be positive")
        if int(self.count) <= 0:
            raise ConfigError("bin count must be positive")

    @classmethod
    def spanning(cls, dates: Iterable[DateLike], width: int, unit: BinUnit = BinUnit.YEARS,
                 origin: Optional[DateLike] = None) -> "DateBinning":
        """Smallest binning (from ``origin`` or the earliest date) covering all dates."""
        parsed = [parse_date(d) for d in dates]
        if not parsed:
            raise InputError("Cannot derive a binning from zero dates")
        start = parse_date(origin) if origin is not None else min(parsed)
        unit_bin = cls(origin=start, width=width, count=1, unit=unit)
        last = max(_elapsed_units(d, unit_bin) for d in parsed)
        return cls(origin=start, width=width, count=last // int(width) + 1, unit=unit)

    def to_dict(self) -> Dict[str, Union[str, int]]:
        return {
            "origin": self.origin.isoformat(),
            "width": int(self.width),
            "count": int(self.count),
            "unit": self.unit.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "DateBinning":
        return cls(origin=data["origin"], width=int(data["width"]),
                   count=int(data["count"]), unit=data.get("unit", "years"))


def _elapsed_units(d: date, binning: DateBinning) -> int:
    o = binning.origin
    if binning.unit == BinUnit.DAYS:
        return (d - o).days
    if binning.unit == BinUnit.MONTHS:
        return (d.year - o.year) * 12 + (d.month - o.month) - (1 if d.day < o.day else 0)
    return d.year - o.year - (1 if (d.month, d.day) < (o.month, o.day) else 0)


def bin_of(when: DateLike, binning: DateBinning) -> int:
    """Index of the bin containing ``when``."""
    d = parse_date(when)
    elapsed = _elapsed_units(d, binning)
    if elapsed < 0:
        raise DateRangeError(f"Date {d.isoformat()} precedes origin {binning.origin.isoformat()}",
                             date=d.isoformat())
    index = elapsed // int(binning.width)
    if index >= binning.count:
        raise DateRangeError(f"Date {d.isoformat()} falls after the last of {binning.count} bins",
                             date=d.isoformat())
    return index


def _add_months(d: date, months: int) -> date:
    total = d.year * 12 + (d.month - 1) + months
    year, month = divmod(total, 12)
    day = min(d.day, calendar.monthrange(year, month + 1)[1])
    return date(year, month + 1, day)


def bin_start(index: int, binning: DateBinning) -> date:
    """Calendar date at which bin ``index`` opens."""
    step = index * int(binning.width)
    if binning.unit == BinUnit.DAYS:
        return binning.origin + timedelta(days=step)
    if binning.unit == BinUnit.MONTHS:
        return _add_months(binning.origin, step)
    return _add_months(binning.origin, 12 * step)


def bin_labels(binning: DateBinning) -> List[str]:
    return [bin_start(k, binning).isoformat() for k in range(binning.count)]


# ==================== Trend Sets ====================

@dataclass
class TrendSet:
    """A family of trend series sharing one binning."""
    series: List[TrendSeries]
    empty_bins: List[bool]
    binning: Optional[DateBinning] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def by_id(self) -> Dict[str, TrendSeries]:
        return {s.id: s for s in self.series}

    def ids(self) -> List[str]:
        return [s.id for s in self.series]

    def matrix(self) -> np.ndarray:
        """Series stacked row-wise (series x bins)."""
        if not self.series:
            return np.zeros((0, len(self.empty_bins)))
        return np.vstack([s.as_array() for s in self.series])


def _flag_empty(totals: np.ndarray, what: str) -> List[bool]:
    empty = totals <= 0
    if empty.any():
        logger.warning(f"{int(empty.sum())} empty bin(s) in {what} trends: {np.flatnonzero(empty).tolist()}")
    return empty.tolist()


def style_trends(
    assignments: Sequence[StyleAssignment],
    instances: Sequence[InstanceRecord],
    binning: DateBinning,
) -> TrendSet:
    """Popularity of each style per bin (fraction of assigned instances)."""
    by_id = {inst.id: inst for inst in instances}
    style_ids = sorted({a.style_id for a in assignments})
    row_of = {sid: r for r, sid in enumerate(style_ids)}
    counts = np.zeros((len(style_ids), binning.count))
    seen = set()

    for a in assignments:
        inst = by_id.get(a.instance_id)
        if inst is None:
            raise InputError(f"Assignment references unknown instance {a.instance_id}")
        if a.instance_id in seen:
            raise InputError(f"Instance {a.instance_id} is assigned to more than one style")
        seen.add(a.instance_id)
        counts[row_of[a.style_id], bin_of(inst.date, binning)] += 1

    totals = counts.sum(axis=0)
    empty = _flag_empty(totals, "style")
    values = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)

    series = [TrendSeries(id=sid, values=values[r].tolist(), kind=TrendKind.STYLE)
              for r, sid in enumerate(style_ids)]
    return TrendSet(series=series, empty_bins=empty, binning=binning)


def topic_trends(
    doc_topics: np.ndarray,
    doc_dates: Sequence[DateLike],
    binning: DateBinning,
    topic_ids: Optional[Sequence[str]] = None,
) -> TrendSet:
    """Normalized topic mass per bin from per-document topic distributions."""
    theta = np.atleast_2d(np.asarray(doc_topics, dtype=float))
    if theta.shape[0] != len(doc_dates):
        raise InputError(f"{theta.shape[0]} topic rows but {len(doc_dates)} document dates")
    if theta.size and not np.allclose(theta.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
        raise InputError("Every document topic distribution must sum to 1")

    n_topics = theta.shape[1]
    ids = list(topic_ids) if topic_ids is not None else [topic_id(k) for k in range(n_topics)]
    if len(ids) != n_topics:
        raise InputError(f"{len(ids)} topic ids for {n_topics} topics")

    bins = np.array([bin_of(d, binning) for d in doc_dates], dtype=int)
    mass = np.zeros((n_topics, binning.count))
    for t in np.unique(bins):
        mass[:, t] = theta[bins == t].sum(axis=0)

    totals = mass.sum(axis=0)
    empty = _flag_empty(totals, "topic")
    values = np.divide(mass, totals, out=np.zeros_like(mass), where=totals > 0)

    series = [TrendSeries(id=ids[k], values=values[k].tolist(), kind=TrendKind.TOPIC)
              for k in range(n_topics)]
    return TrendSet(series=series, empty_bins=empty, binning=binning)


def topic_id(index: int) -> str:
    return f"topic_{index}"


def topic_index(tid: str) -> int:
    """Inverse of ``topic_id``."""
    try:
        return int(str(tid).rsplit("_", 1)[1])
    except (IndexError, ValueError) as e:
        raise InputError(f"Not a topic id: {tid!r}") from e


def interpolate_empty(series: TrendSeries, empty_bins: Sequence[bool]) -> TrendSeries:
    """Linearly fill flagged bins from their observed neighbours."""
    values = series.as_array()
    empty = np.asarray(empty_bins, dtype=bool)
    if not empty.any() or empty.all():
        return series
    observed = np.flatnonzero(~empty)
    filled = values.copy()
    filled[empty] = np.interp(np.flatnonzero(empty), observed, values[observed])
    return TrendSeries(id=series.id, values=filled.tolist(), kind=series.kind)


def interpolate_set(trends: TrendSet) -> TrendSet:
    return TrendSet(
        series=[interpolate_empty(s, trends.empty_bins) for s in trends.series],
        empty_bins=list(trends.empty_bins),
        binning=trends.binning,
        meta={**trends.meta, "interpolated": True},
    )
