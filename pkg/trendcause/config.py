"""
Pipeline configuration

A JSON document validated into ``PipelineConfig``. Values are layered
defaults < file < environment < command-line flags. Environment overrides
use ``TRENDCAUSE_<SECTION>__<KEY>`` (double underscore for nesting) and are
read after ``load_dotenv()`` so a local ``.env`` file applies too.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .core import BinUnit, DateBinning
from .dataio import canonical_json
from .exceptions import ConfigError, InputError
from .models import ErrorMetric, MethodKind
from .style_discovery import FilterDirection, FilterStatistics

logger = logging.getLogger(__name__)

ENV_PREFIX = "TRENDCAUSE_"
# Read by the CLI for logging, not part of the pipeline config.
_RESERVED = {"TRENDCAUSE_LOG_LEVEL"}


# ==================== Sections ====================

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BinningSection(_Section):
    """Trend bins; ``count=None`` spans every input date."""
    origin: Optional[str] = None
    width: int = Field(5, ge=1)
    unit: BinUnit = BinUnit.YEARS
    count: Optional[int] = Field(None, ge=1)

    def resolve(self, dates: Sequence[str]) -> DateBinning:
        if self.count is not None and self.origin is not None:
            return DateBinning(origin=self.origin, width=self.width, count=self.count, unit=self.unit)
        return DateBinning.spanning(dates, self.width, self.unit, origin=self.origin)


class ClusteringSection(_Section):
    damping: float = 0.9
    max_iter: int = 1000
    convergence_window: int = 50
    preference: Optional[float] = None
    entropy_direction: FilterDirection = FilterDirection.UPPER
    entropy_multiplier: float = 2.0
    # leave_one_out: mu and sigma over the other clusters; population: over all of them
    entropy_statistics: FilterStatistics = FilterStatistics.LEAVE_ONE_OUT
    top_labels: int = 5
    label_names: Optional[List[str]] = None


class TopicsSection(_Section):
    n_topics: int = 400
    alpha: Optional[float] = None
    beta: float = 0.01
    iterations: int = 1000
    average_last: int = 0
    loglik_every: int = 10
    min_doc_len: int = 15
    min_token_freq: int = 1
    stopwords: List[str] = Field(default_factory=list)


class GrangerSection(_Section):
    q1: int = 2
    q2: int = 2
    alpha: float = 0.05
    intercept: bool = False
    fdr: bool = False


class ForecastSection(_Section):
    """``train_bins=None`` trains on the first ``train_fraction`` of the bins."""
    methods: List[MethodKind] = Field(default_factory=lambda: [
        MethodKind.LAST, MethodKind.LINEAR, MethodKind.MEAN, MethodKind.EXP, MethodKind.AR, MethodKind.CULTURAL,
    ])
    train_bins: Optional[int] = Field(None, ge=1)
    train_fraction: float = Field(0.8, gt=0, lt=1)
    horizon: Optional[int] = Field(None, ge=1)
    metric: ErrorMetric = ErrorMetric.MSE
    exp_alpha: float = Field(0.3, ge=0, le=1)
    exp_seed: str = "last"
    exo_mode: str = "observed"
    charts: bool = True

    @field_validator("exo_mode")
    def validate_exo_mode(cls, v):
        if v not in ("observed", "forecast"):
            raise ValueError("exo_mode must be 'observed' or 'forecast'")
        return v


class TimelineSection(_Section):
    k: int = Field(3, ge=1)
    n_events: int = Field(3, ge=0)
    n_words: int = Field(5, ge=1)


class TimestampSection(_Section):
    """Date labels: every 5th year by default; months for finer label sets."""
    label_origin: Optional[str] = None
    label_width: int = Field(5, ge=1)
    label_unit: BinUnit = BinUnit.YEARS
    hidden: List[int] = Field(default_factory=lambda: [256, 128])
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 64
    optimizer: str = "adam"
    holdout: float = Field(0.2, gt=0, lt=1)
    normalize: bool = True


class PathsSection(_Section):
    instances: Optional[str] = None
    documents: Optional[str] = None
    scenario: Optional[str] = None
    output: str = "trendcause-out"


class PipelineConfig(_Section):
    seed: int = 0
    threads: int = Field(1, ge=1)
    interpolate_empty: bool = False
    binning: BinningSection = Field(default_factory=BinningSection)
    clustering: ClusteringSection = Field(default_factory=ClusteringSection)
    topics: TopicsSection = Field(default_factory=TopicsSection)
    granger: GrangerSection = Field(default_factory=GrangerSection)
    forecast: ForecastSection = Field(default_factory=ForecastSection)
    timeline: TimelineSection = Field(default_factory=TimelineSection)
    timestamp: TimestampSection = Field(default_factory=TimestampSection)
    paths: PathsSection = Field(default_factory=PathsSection)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(canonical_json(self.model_dump(mode="json")).encode("utf-8")).hexdigest()


# ==================== Loading ====================

def _parse_env_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def set_nested(data: Dict[str, Any], keys: Sequence[str], value: Any):
    node = data
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Deep-merge ``overrides`` into a copy of ``base``; None values are skipped."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = dict(value) if isinstance(value, Mapping) else value
    return merged


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Nested overrides from ``TRENDCAUSE_*`` variables.

    Values are parsed as JSON when possible (``5``, ``true``, ``[1, 2]``),
    otherwise kept as strings.
    """
    environ = os.environ if environ is None else environ
    overrides: Dict[str, Any] = {}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX) or name in _RESERVED:
            continue
        keys = [k.lower() for k in name[len(ENV_PREFIX):].split("__") if k]
        if keys:
            set_nested(overrides, keys, _parse_env_value(environ[name]))
            logger.debug(f"Config override from {name}")
    return overrides


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
    use_dotenv: bool = True,
) -> PipelineConfig:
    """Build the effective configuration.

    Raises:
        ConfigError: unreadable file or invalid values
    """
    if use_dotenv and environ is None:
        load_dotenv()

    data: Dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"Config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: invalid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top level must be an object")

    data = merge(data, env_overrides(environ))
    data = merge(data, overrides or {})
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    except InputError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
