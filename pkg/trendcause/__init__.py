"""
trendcause - Visual style trends, the cultural events that drive them, and dating from both

QUICK START:
-----------
from trendcause import SynthConfig, generate, screen_all_pairs, GrangerConfig

# 1. Generate a synthetic scenario with planted topic -> style links
data = generate(SynthConfig(seed=7, n_causal=5, n_null=5))

# 2. Screen every (style, topic) pair for Granger influence
screen = screen_all_pairs(data.styles.series, data.topics.series, GrangerConfig(fdr=True))
print(screen.influence_map)

# 3. Forecast styles with and without their influencing topics
from trendcause import ForecastMethod, run_benchmark
bench = run_benchmark(data.styles.series, data.topics.series, screen.influence_map,
                      train_bins=80, methods=[ForecastMethod.ar(), ForecastMethod.cultural()])
print(bench.summary)

# 4. Or run every stage from a config file
from trendcause import load_config, run_pipeline
result = run_pipeline(load_config("pipeline.json"))

CORE MODULES:
------------
- style_discovery: affinity propagation + entropy filter over visual instances
- topic_mining: collapsed-Gibbs LDA over dated documents
- core: date binning and trend series
- influence: Granger screening of topic -> style pairs
- forecast: baselines, AR and cultural (ARX) forecasters, benchmark
- timeline: iconic styles per era with their causal topics and events
- timestamp: cross-modal mapper and nearest-neighbor dating
- synth: scenarios with known ground truth
- pipeline / cli: end-to-end runs with a manifest

For full documentation: help(trendcause.pipeline) or see README.md
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    TrendCauseError,
    InputError,
    DateRangeError,
    DimensionMismatchError,
    EmptyCorpusError,
    InsufficientDataError,
    NoSignalError,
    ConfigError,
    StageError,
    DivergenceError,
    SynthesisError,
)
from .models import (  # noqa: E402
    TrendKind,
    MethodKind,
    ErrorMetric,
    TimestampMode,
    TrendSeries,
    InstanceRecord,
    DocumentRecord,
    StyleAssignment,
    StyleCluster,
    GrangerResult,
    ForecastReport,
    IconicStyle,
    CausalTopic,
    TracedEvent,
    TimelineEntry,
    GroundTruth,
)
from .core import BinUnit, DateBinning, TrendSet, style_trends, topic_trends  # noqa: E402
from .style_discovery import APConfig, EntropyFilterRule, affinity_propagation, discover_styles  # noqa: E402
from .topic_mining import TopicModel, build_corpus, lda_fit, top_words  # noqa: E402
from .influence import GrangerConfig, granger_test, screen_all_pairs  # noqa: E402
from .forecast import ForecastMethod, forecast, evaluate, run_benchmark  # noqa: E402
from .timeline import lift_index, iconic_styles, trace_events, build_timeline  # noqa: E402
from .timestamp import (  # noqa: E402
    MapperConfig,
    CrossModalMapper,
    train_mapper,
    build_database,
    predict_date,
    eval_timestamp,
)
from .synth import SynthConfig, generate, timestamp_benchmark  # noqa: E402
from .charts import emit_chart  # noqa: E402
from .config import PipelineConfig, load_config  # noqa: E402
from .execution import ThreadedExecutor  # noqa: E402
from .pipeline import run_pipeline  # noqa: E402

__all__ = [
    "__version__",
    # Errors
    "TrendCauseError",
    "InputError",
    "DateRangeError",
    "DimensionMismatchError",
    "EmptyCorpusError",
    "InsufficientDataError",
    "NoSignalError",
    "ConfigError",
    "StageError",
    "DivergenceError",
    "SynthesisError",
    # Models
    "TrendKind",
    "MethodKind",
    "ErrorMetric",
    "TimestampMode",
    "TrendSeries",
    "InstanceRecord",
    "DocumentRecord",
    "StyleAssignment",
    "StyleCluster",
    "GrangerResult",
    "ForecastReport",
    "IconicStyle",
    "CausalTopic",
    "TracedEvent",
    "TimelineEntry",
    "GroundTruth",
    # Trends
    "BinUnit",
    "DateBinning",
    "TrendSet",
    "style_trends",
    "topic_trends",
    # Styles and topics
    "APConfig",
    "EntropyFilterRule",
    "affinity_propagation",
    "discover_styles",
    "TopicModel",
    "build_corpus",
    "lda_fit",
    "top_words",
    # Influence and forecasting
    "GrangerConfig",
    "granger_test",
    "screen_all_pairs",
    "ForecastMethod",
    "forecast",
    "evaluate",
    "run_benchmark",
    # Timeline
    "lift_index",
    "iconic_styles",
    "trace_events",
    "build_timeline",
    # Timestamping
    "MapperConfig",
    "CrossModalMapper",
    "train_mapper",
    "build_database",
    "predict_date",
    "eval_timestamp",
    # Synthetic data
    "SynthConfig",
    "generate",
    "timestamp_benchmark",
    # Running
    "emit_chart",
    "PipelineConfig",
    "load_config",
    "ThreadedExecutor",
    "run_pipeline",
]
