"""
Synthetic scenarios with planted causal structure

Generates topic trends from seasonal AR processes on the log level, style
trends of which some follow a topic at a fixed lag, clothing instances drawn
from per-style Gaussian blobs and documents drawn from planted topic
vocabularies. The planted adjacency is the ground truth the influence screen
is scored on.

With the default unit AR coefficients no process has a level to revert to,
so the intercept-free Granger regressions are well specified on every
series. Null styles never see the topic draws.
"""

import functools
import logging
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Callable, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .core import BinUnit, DateBinning, TrendSet, bin_start, topic_id, topic_index
from .exceptions import ConfigError, SynthesisError
from .models import (
    CausalLink, DocumentRecord, GroundTruth, InstanceRecord, TrendKind, TrendSeries
)

logger = logging.getLogger(__name__)


def retry_generation(max_retries: int = 5):
    """Decorator re-drawing a sample that hit an infeasible bin.

    The wrapped function keeps consuming the same generator, so the retry
    sequence is itself deterministic.

    Args:
        max_retries: Maximum number of extra attempts
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            for attempt in range(max_retries + 1):
                try:
                    return func(*args, **kwargs)
                except SynthesisError as e:
                    if attempt == max_retries:
                        logger.error(f"{func.__name__} failed after {max_retries} retries: {e}")
                        raise
                    logger.warning(f"{func.__name__} failed (attempt {attempt + 1}/{max_retries + 1}): {e}")
        return wrapper
    return decorator


# ==================== Configuration Models ====================

class SynthConfig(BaseModel):
    """Scenario description; loadable from JSON."""
    seed: int = 0
    bin_count: int = Field(100, ge=1)
    origin: str = "1900-01-01"
    bin_width: int = Field(1, ge=1)
    bin_unit: BinUnit = BinUnit.YEARS

    # topics: AR on the log level, multiplied by a seasonal factor
    n_topics: int = Field(10, ge=1)
    topic_ar: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    seasonal_period: int = Field(52, ge=1)
    seasonal_amplitude: float = Field(0.2, ge=0)
    topic_noise: float = Field(0.1, ge=0)

    # styles
    n_causal: int = Field(25, ge=0)
    n_null: int = Field(25, ge=0)
    lag_range: Tuple[int, int] = (1, 3)
    gain_range: Tuple[float, float] = (0.5, 1.5)
    style_noise: float = Field(0.002, ge=0)
    # null styles: AR(1) on the log level around log(null_mean)
    null_mean: float = Field(0.1, gt=0)
    null_ar: float = 1.0
    null_noise: float = Field(0.1, ge=0)
    # "scenario" divides all style levels by one constant (the largest bin
    # total); "bin" renormalizes every bin to the simplex
    style_normalization: Literal["scenario", "bin"] = "scenario"
    links: Optional[List[CausalLink]] = None

    # instances
    feature_dim: int = Field(8, ge=1)
    blob_spread: float = Field(5.0, ge=0)
    blob_sigma: float = Field(0.3, ge=0)
    instances_per_bin: int = Field(20, ge=1)
    n_labels: int = Field(10, ge=1)

    # documents
    vocab_per_topic: int = Field(20, ge=1)
    docs_per_bin: int = Field(10, ge=1)
    doc_length: int = Field(20, ge=1)

    max_retries: int = Field(5, ge=0)

    @field_validator("lag_range")
    def validate_lags(cls, v):
        if v[0] < 1 or v[1] < v[0]:
            raise ValueError("lags must satisfy 1 <= min <= max")
        return v

    @field_validator("gain_range")
    def validate_gains(cls, v):
        if v[0] <= 0 or v[1] < v[0]:
            raise ValueError("gains must satisfy 0 < min <= max")
        return v

    @model_validator(mode="after")
    def validate_counts(self):
        if self.n_causal + self.n_null < 1:
            raise ValueError("need at least one style")
        if self.links is not None:
            for link in self.links:
                if link.lag < 1:
                    raise ValueError(f"link {link.style_id} <- {link.topic_id} has lag < 1")
        return self

    @classmethod
    def load(cls, data: Mapping) -> "SynthConfig":
        try:
            return cls.model_validate(dict(data))
        except ValidationError as e:
            raise ConfigError(f"Invalid synth scenario: {e}") from e

    def binning(self) -> DateBinning:
        return DateBinning(origin=self.origin, width=self.bin_width, count=self.bin_count, unit=self.bin_unit)

    def style_ids(self) -> List[str]:
        return [f"style_{i}" for i in range(self.n_causal + self.n_null)]

    def topic_ids(self) -> List[str]:
        return [topic_id(k) for k in range(self.n_topics)]


@dataclass
class SynthDataset:
    """Everything one scenario produces."""
    config: SynthConfig
    binning: DateBinning
    topics: TrendSet
    styles: TrendSet
    style_levels: Dict[str, List[float]]
    instances: List[InstanceRecord]
    documents: List[DocumentRecord]
    truth: GroundTruth
    label_names: List[str] = field(default_factory=list)


# ==================== Trend Processes ====================

def _sample_topics(cfg: SynthConfig, rng: np.random.Generator, length: int) -> np.ndarray:
    """Topic shares (topics x length), each column on the simplex."""
    K = cfg.n_topics
    ar = np.asarray(cfg.topic_ar, dtype=float)
    p = len(ar)
    # every topic starts from the same log level, so from equal shares
    log_level = np.zeros((K, length + p))
    shocks = rng.normal(0.0, cfg.topic_noise, size=log_level.shape)
    for t in range(p, log_level.shape[1]):
        log_level[:, t] = log_level[:, t - p:t][:, ::-1] @ ar + shocks[:, t]
    log_level = log_level[:, p:]

    phase = rng.uniform(0.0, cfg.seasonal_period, size=K)
    t = np.arange(length)
    seasonal = cfg.seasonal_amplitude * np.sin(2 * np.pi * (t[None, :] + phase[:, None]) / cfg.seasonal_period)
    with np.errstate(over="ignore"):
        level = np.exp(log_level + seasonal)
    if not np.all(np.isfinite(level)):
        raise SynthesisError("topic levels overflow; check topic_ar")
    return _to_simplex(level, "topic")


def _to_simplex(level: np.ndarray, what: str) -> np.ndarray:
    totals = level.sum(axis=0)
    if np.any(totals <= 0):
        raise SynthesisError(f"all-zero {what} bin at {np.flatnonzero(totals <= 0).tolist()}")
    return level / totals


def _plan_links(cfg: SynthConfig, rng: np.random.Generator) -> List[CausalLink]:
    if cfg.links is not None:
        return list(cfg.links)
    style_ids = cfg.style_ids()
    links = []
    for i in range(cfg.n_causal):
        links.append(CausalLink(
            style_id=style_ids[i],
            topic_id=topic_id(int(rng.integers(cfg.n_topics))),
            lag=int(rng.integers(cfg.lag_range[0], cfg.lag_range[1] + 1)),
            gain=float(rng.uniform(*cfg.gain_range)),
        ))
    return links


def _sample_style_levels(cfg: SynthConfig, rng: np.random.Generator, topics_ext: np.ndarray,
                         burn: int, links: Sequence[CausalLink]) -> np.ndarray:
    """Raw (pre-normalization) style levels, styles x bins."""
    T = cfg.bin_count
    style_ids = cfg.style_ids()
    index = {sid: i for i, sid in enumerate(style_ids)}
    levels = np.zeros((len(style_ids), T))
    causal = set()

    for link in links:
        if link.style_id not in index:
            raise ConfigError(f"Link references unknown style {link.style_id}")
        k = topic_index(link.topic_id)
        if not 0 <= k < cfg.n_topics:
            raise ConfigError(f"Link references unknown topic {link.topic_id}")
        if link.lag > burn:
            raise ConfigError(f"Link lag {link.lag} exceeds the largest configured lag {burn}")
        i = index[link.style_id]
        source = topics_ext[k, burn - link.lag: burn - link.lag + T]
        noise = rng.normal(0.0, cfg.style_noise, size=T) if cfg.style_noise > 0 else 0.0
        levels[i] += link.gain * source + noise
        causal.add(i)

    log_mean = np.log(cfg.null_mean)
    for i in range(len(style_ids)):
        if i in causal:
            continue
        z = np.empty(T)
        prev = log_mean
        for t in range(T):
            prev = log_mean + cfg.null_ar * (prev - log_mean) + rng.normal(0.0, cfg.null_noise)
            z[t] = prev
        levels[i] = np.exp(z)

    levels = np.maximum(levels, 0.0)
    _to_simplex(levels, "style")
    return levels


# ==================== Instances and Documents ====================

def _bin_dates(binning: DateBinning, t: int, n: int, rng: np.random.Generator) -> List[str]:
    start = bin_start(t, binning)
    span = max(1, (bin_start(t + 1, binning) - start).days)
    offsets = rng.integers(0, span, size=n)
    return [(start + timedelta(days=int(o))).isoformat() for o in offsets]


def _sample_instances(cfg: SynthConfig, rng: np.random.Generator, styles: np.ndarray,
                      binning: DateBinning) -> Tuple[List[InstanceRecord], Dict[str, str]]:
    style_ids = cfg.style_ids()
    S = len(style_ids)
    means = rng.normal(0.0, cfg.blob_spread, size=(S, cfg.feature_dim))
    # two favoured attribute labels per style
    favoured = np.stack([rng.choice(cfg.n_labels, size=min(2, cfg.n_labels), replace=False) for _ in range(S)])

    instances, truth = [], {}
    for t in range(cfg.bin_count):
        counts = rng.multinomial(cfg.instances_per_bin, styles[:, t] / styles[:, t].sum())
        dates = _bin_dates(binning, t, cfg.instances_per_bin, rng)
        n = 0
        for i in np.flatnonzero(counts):
            for _ in range(counts[i]):
                iid = f"inst_{t}_{n}"
                features = means[i] + rng.normal(0.0, cfg.blob_sigma, size=cfg.feature_dim)
                activations = rng.uniform(0.0, 0.1, size=cfg.n_labels)
                activations[favoured[i]] += 1.0
                instances.append(InstanceRecord(id=iid, date=dates[n], features=features.tolist(),
                                                activations=activations.tolist()))
                truth[iid] = style_ids[i]
                n += 1
    return instances, truth


def _sample_documents(cfg: SynthConfig, rng: np.random.Generator, topics: np.ndarray,
                      binning: DateBinning) -> Tuple[List[DocumentRecord], Dict[str, str]]:
    documents, truth = [], {}
    for t in range(cfg.bin_count):
        dates = _bin_dates(binning, t, cfg.docs_per_bin, rng)
        chosen = rng.choice(cfg.n_topics, size=cfg.docs_per_bin, p=topics[:, t])
        for n, k in enumerate(chosen):
            did = f"doc_{t}_{n}"
            words = rng.integers(0, cfg.vocab_per_topic, size=cfg.doc_length)
            documents.append(DocumentRecord(doc_id=did, date=dates[n],
                                            tokens=[f"t{k}w{w}" for w in words]))
            truth[did] = topic_id(int(k))
    return documents, truth


# ==================== Generate ====================

def generate(cfg: SynthConfig) -> SynthDataset:
    """Sample a complete scenario; identical for identical configs."""
    rng = np.random.default_rng(cfg.seed)
    binning = cfg.binning()
    links = _plan_links(cfg, rng)
    burn = max([cfg.lag_range[1]] + [link.lag for link in links])

    retry = retry_generation(cfg.max_retries)
    topics_ext = retry(_sample_topics)(cfg, rng, cfg.bin_count + burn)
    topics = topics_ext[:, burn:]
    levels = retry(_sample_style_levels)(cfg, rng, topics_ext, burn, links)
    totals = levels.sum(axis=0)
    styles = levels / (totals if cfg.style_normalization == "bin" else totals.max())

    style_ids = cfg.style_ids()
    topic_ids = cfg.topic_ids()
    topic_set = TrendSet(
        series=[TrendSeries(id=tid, values=topics[k].tolist(), kind=TrendKind.TOPIC)
                for k, tid in enumerate(topic_ids)],
        empty_bins=[False] * cfg.bin_count, binning=binning)
    style_set = TrendSet(
        series=[TrendSeries(id=sid, values=styles[i].tolist(), kind=TrendKind.STYLE)
                for i, sid in enumerate(style_ids)],
        empty_bins=[False] * cfg.bin_count, binning=binning)

    instances, instance_truth = _sample_instances(cfg, rng, styles, binning)
    documents, document_truth = _sample_documents(cfg, rng, topics, binning)

    truth = GroundTruth(links=links, instance_styles=instance_truth, document_topics=document_truth)
    logger.info(f"Synthesized {len(style_ids)} styles ({len(links)} causal links), {len(topic_ids)} topics, "
                f"{len(instances)} instances, {len(documents)} documents over {cfg.bin_count} bins")
    return SynthDataset(
        config=cfg, binning=binning, topics=topic_set, styles=style_set,
        style_levels={sid: levels[i].tolist() for i, sid in enumerate(style_ids)},
        instances=instances, documents=documents, truth=truth,
        label_names=[f"attr_{j}" for j in range(cfg.n_labels)],
    )


def pair_precision_recall(influence_map: Mapping[str, Sequence[str]],
                          truth: Mapping[str, Sequence[str]]) -> Tuple[float, float]:
    """Pair-level precision and recall of a recovered influence map.

    No recovered pairs counts as precision 1.0.
    """
    found = {(s, t) for s, topics in influence_map.items() for t in topics}
    planted = {(s, t) for s, topics in truth.items() for t in topics}
    hits = len(found & planted)
    precision = hits / len(found) if found else 1.0
    recall = hits / len(planted) if planted else 1.0
    return precision, recall


# ==================== Timestamp Benchmark ====================

@dataclass
class TimestampBenchmark:
    """Reference entries and independent queries over slowly drifting labels."""
    ids: List[str]
    labels: List[str]
    visual: np.ndarray
    cultural: np.ndarray
    query_visual: np.ndarray
    query_labels: List[str]
    label_set: List[str]


def timestamp_benchmark(
    n_labels: int = 20,
    per_label: int = 100,
    n_queries: int = 2000,
    feature_dim: int = 4,
    drift: float = 0.5,
    noise: float = 1.0,
    seed: int = 0,
) -> TimestampBenchmark:
    """Visual features drift by ``drift`` per label along one axis under
    isotropic ``noise``; each label's cultural feature is a distinct
    probability vector.
    """
    if n_labels < 1 or per_label < 1 or n_queries < 0:
        raise ConfigError("benchmark sizes must be positive")
    rng = np.random.default_rng(seed)
    label_set = [f"{1900 + 5 * j}-01-01" for j in range(n_labels)]
    centers = np.zeros((n_labels, feature_dim))
    centers[:, 0] = drift * np.arange(n_labels)
    cultural_by_label = np.full((n_labels, n_labels), 0.2 / max(1, n_labels - 1))
    np.fill_diagonal(cultural_by_label, 0.8 if n_labels > 1 else 1.0)

    def _draw(n):
        which = rng.integers(0, n_labels, size=n)
        return which, centers[which] + rng.normal(0.0, noise, size=(n, feature_dim))

    which = np.repeat(np.arange(n_labels), per_label)
    visual = centers[which] + rng.normal(0.0, noise, size=(len(which), feature_dim))
    q_which, q_visual = _draw(n_queries)
    return TimestampBenchmark(
        ids=[f"ref_{i:05d}" for i in range(len(which))],
        labels=[label_set[j] for j in which],
        visual=visual,
        cultural=cultural_by_label[which],
        query_visual=q_visual,
        query_labels=[label_set[j] for j in q_which],
        label_set=label_set,
    )
