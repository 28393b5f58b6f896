"""
File formats

- JSONL: one record per line (instances, documents, assignments)
- trend CSV: ``id,bin_0,...,bin_{T-1}`` plus a ``.meta.json`` side file
  holding the binning and the empty-bin flags
- canonical JSON: sorted keys, 2-space indent, trailing newline
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from .core import DateBinning, TrendSet
from .exceptions import InputError, TrendCauseError
from .models import DocumentRecord, InstanceRecord, StyleAssignment, TrendKind, TrendSeries

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)


def _existing(path: PathLike) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"Input file not found: {p}")
    return p


def _parent(path: PathLike) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# ==================== JSON ====================

def canonical_json(data: Any) -> str:
    """Sorted keys, 2-space indent, trailing newline; standard JSON numbers only."""
    try:
        return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    except ValueError as e:
        raise TrendCauseError(f"Refusing to write non-finite number as JSON: {e}") from e


def write_json(path: PathLike, data: Any) -> Path:
    p = _parent(path)
    p.write_text(canonical_json(data), encoding="utf-8")
    logger.debug(f"Wrote {p}")
    return p


def read_json(path: PathLike) -> Any:
    p = _existing(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"{p}: invalid JSON: {e}") from e


# ==================== JSONL ====================

def read_jsonl(path: PathLike, model: Type[M]) -> List[M]:
    """Parse every non-blank line of ``path`` into ``model``."""
    p = _existing(path)
    records = []
    with p.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(model.model_validate_json(line))
            except ValidationError as e:
                raise InputError(f"{p}:{lineno}: {e}") from e
    logger.info(f"Read {len(records)} {model.__name__} record(s) from {p}")
    return records


def write_jsonl(path: PathLike, records: Iterable[BaseModel]) -> Path:
    p = _parent(path)
    with p.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.model_dump(mode="json"), sort_keys=True, ensure_ascii=False) + "\n")
    return p


def read_instances(path: PathLike) -> List[InstanceRecord]:
    return read_jsonl(path, InstanceRecord)


def read_documents(path: PathLike) -> List[DocumentRecord]:
    return read_jsonl(path, DocumentRecord)


def read_assignments(path: PathLike) -> List[StyleAssignment]:
    return read_jsonl(path, StyleAssignment)


# ==================== Trend CSV ====================

def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def write_trends_csv(path: PathLike, trends: TrendSet) -> Path:
    """Write one row per series; floats use their shortest round-trip repr."""
    p = _parent(path)
    T = len(trends.empty_bins)
    with p.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"bin_{t}" for t in range(T)])
        for series in trends.series:
            writer.writerow([series.id] + [repr(float(v)) for v in series.values])
    kind = trends.series[0].kind.value if trends.series else TrendKind.STYLE.value
    write_json(_meta_path(p), {
        "kind": kind,
        "empty_bins": list(trends.empty_bins),
        "binning": trends.binning.to_dict() if trends.binning else None,
    })
    return p


def read_trends_csv(path: PathLike, kind: Optional[TrendKind] = None) -> TrendSet:
    """Read a trend CSV and, when present, its side file."""
    p = _existing(path)
    meta = read_json(_meta_path(p)) if _meta_path(p).is_file() else {}
    kind = TrendKind(kind or meta.get("kind", TrendKind.STYLE))

    series = []
    with p.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise InputError(f"{p}: expected an 'id,bin_0,...' header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{p}:{lineno}: {len(row) - 1} values, header has {len(header) - 1} bins")
            try:
                series.append(TrendSeries(id=row[0], values=[float(v) for v in row[1:]], kind=kind))
            except (ValueError, ValidationError) as e:
                raise InputError(f"{p}:{lineno}: {e}") from e

    T = len(header) - 1
    binning = DateBinning.from_dict(meta["binning"]) if meta.get("binning") else None
    empty = list(meta.get("empty_bins", [False] * T))
    if len(empty) != T:
        raise InputError(f"{p}: side file flags {len(empty)} bins, CSV has {T}")
    return TrendSet(series=series, empty_bins=empty, binning=binning)


# ==================== Hashing ====================

def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with _existing(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
