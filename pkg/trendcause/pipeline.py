"""
End-to-end pipeline

Runs cluster -> topics -> trends -> granger -> forecast -> timeline ->
timestamp over one configuration and records a manifest of every stage
and the SHA-256 of every artifact it wrote. Manifests carry no wall-clock
content, so identical configurations produce identical bytes.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import __version__
from .charts import emit_chart, emit_style_stack, emit_timeline_chart
from .config import PipelineConfig
from .core import DateBinning, TrendSet, bin_labels, interpolate_set, style_trends, topic_trends
from .dataio import read_documents, read_instances, read_json, sha256_file, write_json, write_jsonl, write_trends_csv
from .exceptions import ConfigError, StageError, TrendCauseError
from .forecast import Benchmark, ForecastMethod, run_benchmark
from .influence import GrangerConfig, InfluenceScreen, screen_all_pairs
from .models import DocumentRecord, InstanceRecord, MethodKind, TrendSeries
from .style_discovery import APConfig, EntropyFilterRule, StyleDiscovery, discover_styles
from .synth import SynthConfig, generate
from .timeline import build_timeline, timeline_to_dict
from .timestamp import (
    MapperConfig, TimestampDatabase, build_database, evaluate_holdout, split_holdout, train_mapper
)
from .topic_mining import Corpus, LDAConfig, TopicModel, build_corpus, lda_fit

logger = logging.getLogger(__name__)

STAGES = ("cluster", "topics", "trends", "granger", "forecast", "timeline", "timestamp")

COMPLETED = "completed"
FAILED = "failed"
SKIPPED = "skipped"


@dataclass
class RunContext:
    """State handed from stage to stage."""
    config: PipelineConfig
    output: Path
    instances: List[InstanceRecord]
    documents: List[DocumentRecord]
    discovery: Optional[StyleDiscovery] = None
    corpus: Optional[Corpus] = None
    model: Optional[TopicModel] = None
    binning: Optional[DateBinning] = None
    styles: Optional[TrendSet] = None
    topics: Optional[TrendSet] = None
    screen: Optional[InfluenceScreen] = None
    benchmark: Optional[Benchmark] = None
    label_names: Optional[List[str]] = None
    artifacts: Dict[str, List[Path]] = field(default_factory=dict)

    def write_json(self, stage: str, name: str, data) -> Path:
        return self._record(stage, write_json(self.output / name, data))

    def _record(self, stage: str, path: Path) -> Path:
        self.artifacts.setdefault(stage, []).append(path)
        return path


@dataclass
class PipelineResult:
    exit_code: int
    manifest: Dict
    manifest_path: Path


# ==================== Inputs ====================

def load_inputs(config: PipelineConfig, output: Path):
    """Instances and documents from the configured files or a synth scenario."""
    paths = config.paths
    if paths.scenario:
        scenario = SynthConfig.load(read_json(paths.scenario))
        dataset = generate(scenario)
        write_jsonl(output / "inputs" / "instances.jsonl", dataset.instances)
        write_jsonl(output / "inputs" / "documents.jsonl", dataset.documents)
        write_json(output / "inputs" / "ground_truth.json", dataset.truth.model_dump(mode="json"))
        return dataset.instances, dataset.documents, dataset.label_names
    if not paths.instances or not paths.documents:
        raise ConfigError("paths.instances and paths.documents are required without a scenario")
    return read_instances(paths.instances), read_documents(paths.documents), None


# ==================== Stages ====================

def _stage_cluster(ctx: RunContext):
    cfg = ctx.config.clustering
    ap = APConfig(damping=cfg.damping, max_iter=cfg.max_iter,
                  convergence_window=cfg.convergence_window, preference=cfg.preference)
    rule = EntropyFilterRule(direction=cfg.entropy_direction, multiplier=cfg.entropy_multiplier,
                             statistics=cfg.entropy_statistics)
    ctx.discovery = discover_styles(ctx.instances, ap, rule, cfg.label_names or ctx.label_names,
                                    cfg.top_labels)
    ctx.write_json("cluster", "clusters.json", {
        "clusters": [c.model_dump(mode="json") for c in ctx.discovery.clusters],
        "retained": [c.style_id for c in ctx.discovery.retained],
        "converged": ctx.discovery.converged,
        "iterations": ctx.discovery.iterations,
        "warnings": ctx.discovery.warnings,
    })
    ctx._record("cluster", write_jsonl(ctx.output / "assignments.jsonl", ctx.discovery.assignments))


def _stage_topics(ctx: RunContext):
    cfg = ctx.config.topics
    ctx.corpus = build_corpus(ctx.documents, cfg.min_doc_len, cfg.min_token_freq, frozenset(cfg.stopwords))
    lda = LDAConfig(n_topics=cfg.n_topics, alpha=cfg.alpha, beta=cfg.beta, iterations=cfg.iterations,
                    seed=ctx.config.seed, average_last=cfg.average_last, loglik_every=cfg.loglik_every)
    ctx.model = lda_fit(ctx.corpus, lda.n_topics, lda.alpha, lda.beta, lda.iterations, lda.seed,
                        lda.average_last, lda.loglik_every)
    ctx.write_json("topics", "topic_model.json", ctx.model.to_dict())


def _stage_trends(ctx: RunContext):
    dates = [inst.date for inst in ctx.instances] + list(ctx.model.doc_dates)
    ctx.binning = ctx.config.binning.resolve(dates)
    ctx.styles = style_trends(ctx.discovery.assignments, ctx.instances, ctx.binning)
    ctx.topics = topic_trends(ctx.model.theta, ctx.model.doc_dates, ctx.binning)
    if ctx.config.interpolate_empty:
        ctx.styles = interpolate_set(ctx.styles)
        ctx.topics = interpolate_set(ctx.topics)
    ctx._record("trends", write_trends_csv(ctx.output / "style_trends.csv", ctx.styles))
    ctx._record("trends", write_trends_csv(ctx.output / "topic_trends.csv", ctx.topics))


def _stage_granger(ctx: RunContext):
    g = ctx.config.granger
    cfg = GrangerConfig(q1=g.q1, q2=g.q2, alpha=g.alpha, intercept=g.intercept, fdr=g.fdr)
    ctx.screen = screen_all_pairs(ctx.styles.series, ctx.topics.series, cfg, ctx.config.threads)
    ctx.write_json("granger", "granger.json", ctx.screen.to_dict())


def forecast_methods(config: PipelineConfig) -> List[ForecastMethod]:
    f, g = config.forecast, config.granger
    methods = []
    for kind in f.methods:
        if kind == MethodKind.EXP:
            methods.append(ForecastMethod.exp(f.exp_alpha, f.exp_seed))
        elif kind in (MethodKind.AR, MethodKind.CULTURAL, MethodKind.CULTURAL_ALL):
            methods.append(ForecastMethod(kind, q1=g.q1, q2=g.q2))
        else:
            methods.append(ForecastMethod(kind))
    return methods


def train_bins_for(config: PipelineConfig, count: int) -> int:
    f = config.forecast
    return f.train_bins or max(1, int(round(f.train_fraction * count)))


def forecast_charts(
    styles: Sequence[TrendSeries],
    benchmark: Benchmark,
    train_bins: int,
    out_dir: Path,
    x_labels: Optional[Sequence[str]] = None,
) -> List[Path]:
    """Train / truth / AR / cultural chart per style plus a stacked overview."""
    by_style: Dict[str, Dict[str, List[float]]] = {}
    for report in benchmark.reports:
        by_style.setdefault(report.style_id, {})[report.method] = report.predictions
    written = []
    for style in styles:
        predictions = by_style.get(style.id)
        if not predictions:
            continue
        values = style.as_array()
        horizon = len(next(iter(predictions.values())))
        shown = {"truth": values[train_bins:train_bins + horizon].tolist()}
        shown.update({m: p for m, p in predictions.items() if m in ("ar", "cultural")})
        train = TrendSeries(id="train", values=values[:train_bins].tolist(), kind=style.kind)
        written.append(emit_chart([train], out_dir / f"forecast_{style.id}.svg", predictions=shown,
                                  start=train_bins, x_labels=x_labels, title=style.id))
    if styles:
        written.append(emit_style_stack(styles, out_dir / "styles.svg", x_labels=x_labels))
    return written


def _stage_forecast(ctx: RunContext):
    f = ctx.config.forecast
    train_bins = train_bins_for(ctx.config, ctx.binning.count)
    ctx.benchmark = run_benchmark(
        ctx.styles.series, ctx.topics.series, ctx.screen.influence_map, train_bins,
        forecast_methods(ctx.config), f.horizon, f.metric, f.exo_mode, ctx.config.threads,
    )
    ctx.write_json("forecast", "forecast.json", ctx.benchmark.to_dict())
    if f.charts:
        for path in forecast_charts(ctx.styles.series, ctx.benchmark, train_bins, ctx.output / "charts",
                                    bin_labels(ctx.binning)):
            ctx._record("forecast", path)


def _stage_timeline(ctx: RunContext):
    t = ctx.config.timeline
    entries = build_timeline(ctx.styles.series, ctx.screen.influence_map, ctx.model, ctx.corpus,
                             ctx.binning, t.k, t.n_events, t.n_words, ctx.config.threads)
    ctx.write_json("timeline", "timeline.json", timeline_to_dict(entries, ctx.binning))
    ctx._record("timeline", emit_timeline_chart(entries, ctx.output / "timeline.svg"))


def timestamp_database(config: PipelineConfig, instances: Sequence[InstanceRecord], model: TopicModel,
                       origin=None) -> TimestampDatabase:
    """Database over the configured date labels (every 5th year by default)."""
    t = config.timestamp
    dates = [inst.date for inst in instances] + list(model.doc_dates)
    label_binning = DateBinning.spanning(dates, t.label_width, t.label_unit, origin=t.label_origin or origin)
    return build_database(instances, label_binning, model.theta, model.doc_dates)


def fit_timestamper(config: PipelineConfig, db: TimestampDatabase, with_mapper: bool = True):
    """Hold out a seeded split and train the mapper on the rest."""
    t = config.timestamp
    train_idx, test_idx = split_holdout(len(db), t.holdout, config.seed)
    mapper = None
    if with_mapper:
        mapper_cfg = MapperConfig(hidden=tuple(t.hidden), learning_rate=t.learning_rate, epochs=t.epochs,
                                  batch_size=t.batch_size, seed=config.seed, optimizer=t.optimizer)
        mapper = train_mapper(db.visual[train_idx], db.cultural[train_idx], mapper_cfg)
    return mapper, test_idx


def _stage_timestamp(ctx: RunContext):
    db = timestamp_database(ctx.config, ctx.instances, ctx.model, ctx.binning.origin)
    mapper, test_idx = fit_timestamper(ctx.config, db)
    report = evaluate_holdout(db, test_idx, mapper, ctx.config.timestamp.normalize, ctx.config.threads)
    ctx.write_json("timestamp", "mapper.json", {
        "mapper": mapper.to_dict(),
        "holdout_ids": [db.ids[i] for i in test_idx],
    })
    ctx.write_json("timestamp", "timestamp.json", report.to_dict())


_RUNNERS: Dict[str, Callable[[RunContext], None]] = {
    "cluster": _stage_cluster,
    "topics": _stage_topics,
    "trends": _stage_trends,
    "granger": _stage_granger,
    "forecast": _stage_forecast,
    "timeline": _stage_timeline,
    "timestamp": _stage_timestamp,
}


# ==================== Run ====================

def _run_stage(name: str, ctx: RunContext):
    try:
        _RUNNERS[name](ctx)
    except TrendCauseError as e:
        raise StageError(str(e), stage=name) from e


def _manifest(ctx: RunContext, statuses: Dict[str, Dict]) -> Dict:
    stages = []
    for name in STAGES:
        entry = dict(statuses.get(name, {"status": SKIPPED}))
        entry["name"] = name
        entry["artifacts"] = {
            p.relative_to(ctx.output).as_posix(): sha256_file(p)
            for p in ctx.artifacts.get(name, [])
        }
        stages.append(entry)
    failed = [s["name"] for s in stages if s["status"] == FAILED]
    return {
        "version": __version__,
        "seed": ctx.config.seed,
        "config_sha256": ctx.config.fingerprint(),
        "config": ctx.config.model_dump(mode="json"),
        "stages": stages,
        "completed": sum(1 for s in stages if s["status"] == COMPLETED),
        "failed_stage": failed[0] if failed else None,
    }


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage in order; stop at the first failure.

    Artifacts of stages that completed before a failure are kept. Input
    errors (missing files, bad records) propagate before any stage runs.
    """
    output = Path(config.paths.output)
    output.mkdir(parents=True, exist_ok=True)
    instances, documents, label_names = load_inputs(config, output)
    ctx = RunContext(config=config, output=output, instances=instances, documents=documents,
                     label_names=label_names)

    statuses: Dict[str, Dict] = {}
    exit_code = 0
    for name in STAGES:
        started = time.perf_counter()
        logger.info(f"Stage {name}: starting")
        try:
            _run_stage(name, ctx)
        except StageError as e:
            statuses[name] = {"status": FAILED, "error": str(e)}
            logger.error(str(e))
            exit_code = e.exit_code
            break
        statuses[name] = {"status": COMPLETED}
        logger.info(f"Stage {name}: completed in {time.perf_counter() - started:.2f}s")

    manifest = _manifest(ctx, statuses)
    manifest_path = write_json(output / "manifest.json", manifest)
    logger.info(f"Pipeline finished: {manifest['completed']}/{len(STAGES)} stages completed")
    return PipelineResult(exit_code=exit_code, manifest=manifest, manifest_path=manifest_path)
