"""
trendcause data models

Pydantic models for every record that crosses a file boundary: ingested
instances and documents, exported trends, clusters, Granger results,
forecast reports, timeline entries and synthetic ground truth.
"""

import math
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import (
    AliasChoices, BaseModel, ConfigDict, Field, computed_field, field_serializer, field_validator, model_validator
)

# ==================== Enums ====================

class TrendKind(str, Enum):
    """What a trend series measures."""
    STYLE = "style"
    TOPIC = "topic"


class MethodKind(str, Enum):
    """Trend forecasting methods.

    CULTURAL_ALL is the ablation that feeds every topic to the cultural
    ensemble instead of only the Granger-causal ones.
    """
    LAST = "last"
    LINEAR = "linear"
    MEAN = "mean"
    EXP = "exp"
    AR = "ar"
    CULTURAL = "cultural"
    CULTURAL_ALL = "cultural_all"


class ErrorMetric(str, Enum):
    MSE = "mse"
    MAE = "mae"


class TimestampMode(str, Enum):
    VISUAL_ONLY = "visual_only"
    VISUAL_PLUS_CULTURAL = "visual_plus_cultural"


# ==================== Trend Models ====================

class TrendSeries(BaseModel):
    """A named, evenly-binned popularity series (one value per bin)."""
    id: str
    values: List[float]
    kind: TrendKind = TrendKind.STYLE

    @field_validator("values")
    def validate_values(cls, v):
        for x in v:
            if not math.isfinite(x):
                raise ValueError("Trend values must be finite")
            if x < 0:
                raise ValueError("Trend values must be nonnegative")
        return v

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)


# ==================== Ingestion Models ====================

class InstanceRecord(BaseModel):
    """One clothing instance: feature vector plus date label."""
    model_config = ConfigDict(populate_by_name=True)

    id: str = Field(..., validation_alias=AliasChoices("id", "instance_id", "instanceId"))
    date: str
    features: List[float]
    activations: Optional[List[float]] = None

    @field_validator("date", mode="before")
    def validate_date(cls, v):
        from .core import parse_date  # core imports this module
        return parse_date(v).isoformat()

    @field_validator("features")
    def validate_features(cls, v):
        if not v:
            raise ValueError("features must not be empty")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("features must be finite")
        return v

    @field_validator("activations")
    def validate_activations(cls, v):
        if v is not None and any((not math.isfinite(x)) or x < 0 for x in v):
            raise ValueError("activations must be finite and nonnegative")
        return v


class DocumentRecord(BaseModel):
    """One dated, pre-tokenized text document."""
    model_config = ConfigDict(populate_by_name=True)

    doc_id: str = Field(..., validation_alias=AliasChoices("doc_id", "docId", "id"))
    date: str
    tokens: List[str]

    @field_validator("date", mode="before")
    def validate_date(cls, v):
        from .core import parse_date
        return parse_date(v).isoformat()


class StyleAssignment(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    instance_id: str = Field(..., validation_alias=AliasChoices("instance_id", "instanceId"))
    style_id: str = Field(..., validation_alias=AliasChoices("style_id", "styleId"))


# ==================== Style Discovery Models ====================

class StyleCluster(BaseModel):
    """A candidate style: an AP exemplar and its members."""
    style_id: str
    exemplar: str
    members: List[str]
    entropy: Optional[float] = None
    top_labels: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_exemplar(self):
        if self.exemplar not in self.members:
            raise ValueError(f"Exemplar {self.exemplar} is not a member of {self.style_id}")
        if self.entropy is not None and self.entropy < 0:
            raise ValueError("entropy must be nonnegative")
        return self


# ==================== Influence Models ====================

class GrangerResult(BaseModel):
    """One directed style <- topic Granger test.

    An exact unrestricted fit gives an infinite F; JSON carries it as
    ``f_value: null`` with ``f_infinite: true``.
    """

    style_id: str
    topic_id: str
    f_value: float
    f_critical: float
    p_value: float
    significant: bool
    rss_restricted: float
    rss_unrestricted: float
    alpha_coefficients: List[float]
    beta_coefficients: List[float]
    intercept: Optional[float] = None
    df_num: int
    df_den: int
    n_effective: int
    rank_deficient: bool = False

    @field_validator("f_value", mode="before")
    def restore_infinite(cls, v):
        return math.inf if v is None else v

    @field_serializer("f_value", when_used="json")
    def encode_infinite(self, v: float) -> Optional[float]:
        return None if math.isinf(v) else v

    @computed_field
    @property
    def f_infinite(self) -> bool:
        return math.isinf(self.f_value)


# ==================== Forecast Models ====================

class ForecastReport(BaseModel):
    """Predictions of one method for one style, scored against the truth."""
    style_id: str
    method: str
    metric: ErrorMetric
    predictions: List[float]
    raw_predictions: List[float] = Field(default_factory=list)
    per_step_errors: List[float]
    aggregate_error: float
    fallback: bool = False


# ==================== Timeline Models ====================

class IconicStyle(BaseModel):
    style_id: str
    lift: float


class CausalTopic(BaseModel):
    topic_id: str
    top_words: List[str]


class TracedEvent(BaseModel):
    doc_id: str
    date: str
    score: float
    topic_id: str


class TimelineEntry(BaseModel):
    """One bin of a fashion-history timeline."""
    bin_index: int
    bin_start: str
    iconic_styles: List[IconicStyle] = Field(default_factory=list)
    causal_topics: Dict[str, List[CausalTopic]] = Field(default_factory=dict)
    events: List[TracedEvent] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)


# ==================== Synthetic Ground Truth ====================

class CausalLink(BaseModel):
    style_id: str
    topic_id: str
    lag: int
    gain: float


class GroundTruth(BaseModel):
    links: List[CausalLink] = Field(default_factory=list)
    instance_styles: Dict[str, str] = Field(default_factory=dict)
    document_topics: Dict[str, str] = Field(default_factory=dict)

    def adjacency(self) -> Dict[str, List[str]]:
        """Planted influence map {style_id: [topic_id, ...]}."""
        adjacency: Dict[str, List[str]] = {}
        for link in self.links:
            adjacency.setdefault(link.style_id, []).append(link.topic_id)
        return adjacency
