"""
trendcause command line

    trendcause [--config cfg.json] [--threads N] [--log-level LEVEL] <command> ...

Commands: cluster, topics, trends, granger, forecast, timeline,
timestamp {train,eval}, synth, pipeline.

Exit codes: 0 success, 1 stage failure, 2 bad input, 3 bad config.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

from . import __version__
from .config import PipelineConfig, set_nested, load_config
from .core import DateBinning, bin_labels, style_trends, topic_trends
from .charts import emit_timeline_chart
from .dataio import (
    read_assignments, read_documents, read_instances, read_json, read_trends_csv,
    write_json, write_jsonl, write_trends_csv,
)
from .exceptions import ConfigError, InputError, TrendCauseError
from .forecast import run_benchmark
from .influence import GrangerConfig, screen_all_pairs
from .models import MethodKind, TimestampMode, TrendKind
from .pipeline import (
    fit_timestamper, forecast_charts, forecast_methods, run_pipeline, timestamp_database, train_bins_for,
)
from .style_discovery import APConfig, EntropyFilterRule, discover_styles
from .synth import SynthConfig, generate
from .timeline import build_timeline, timeline_to_dict
from .timestamp import CrossModalMapper, evaluate_holdout
from .topic_mining import TopicModel, build_corpus, lda_fit

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(message)s"

_MODES = {
    "visual": TimestampMode.VISUAL_ONLY,
    "visual_only": TimestampMode.VISUAL_ONLY,
    "cultural": TimestampMode.VISUAL_PLUS_CULTURAL,
    "visual_plus_cultural": TimestampMode.VISUAL_PLUS_CULTURAL,
}


def setup_logging(level: Optional[str] = None):
    level = (level or os.getenv("TRENDCAUSE_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT, force=True)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags whose dest is ``section.key`` become nested config overrides."""
    overrides: Dict[str, Any] = {}
    for dest, value in sorted(vars(args).items()):
        if "." in dest and value is not None:
            set_nested(overrides, dest.split("."), value)
    return overrides


def _corpus_for_model(path: str, model: TopicModel):
    """Documents of ``path`` that the topic model knows, unfiltered."""
    known = set(model.doc_ids)
    docs = [d for d in read_documents(path) if d.doc_id in known]
    return build_corpus(docs, min_doc_len=0, min_token_freq=1)


def _trend_binning(trends, config: PipelineConfig, dates: List[str]) -> DateBinning:
    return trends.binning if trends.binning is not None else config.binning.resolve(dates)


# ==================== Commands ====================

def cmd_cluster(args, config: PipelineConfig) -> int:
    c = config.clustering
    instances = read_instances(args.instances)
    ap = APConfig(damping=c.damping, max_iter=c.max_iter, convergence_window=c.convergence_window,
                  preference=c.preference)
    rule = EntropyFilterRule(direction=c.entropy_direction, multiplier=c.entropy_multiplier,
                             statistics=c.entropy_statistics)
    discovery = discover_styles(instances, ap, rule, c.label_names, c.top_labels)
    write_json(args.out, {
        "clusters": [cl.model_dump(mode="json") for cl in discovery.clusters],
        "retained": [cl.style_id for cl in discovery.retained],
        "converged": discovery.converged,
        "iterations": discovery.iterations,
        "warnings": discovery.warnings,
    })
    assignments = args.assignments or str(Path(args.out).with_name("assignments.jsonl"))
    write_jsonl(assignments, discovery.assignments)
    logger.info(f"{len(discovery.retained)}/{len(discovery.clusters)} styles retained")
    return 0


def cmd_topics(args, config: PipelineConfig) -> int:
    t = config.topics
    corpus = build_corpus(read_documents(args.corpus), t.min_doc_len, t.min_token_freq, frozenset(t.stopwords))
    model = lda_fit(corpus, t.n_topics, t.alpha, t.beta, t.iterations, config.seed,
                    t.average_last, t.loglik_every)
    write_json(args.out, model.to_dict())
    return 0


def cmd_trends(args, config: PipelineConfig) -> int:
    instances = read_instances(args.instances)
    assignments = read_assignments(args.assignments)
    model = TopicModel.from_dict(read_json(args.model))
    binning = config.binning.resolve([i.date for i in instances] + list(model.doc_dates))
    styles = style_trends(assignments, instances, binning)
    topics = topic_trends(model.theta, model.doc_dates, binning)
    write_trends_csv(args.out_styles, styles)
    write_trends_csv(args.out_topics, topics)
    return 0


def cmd_granger(args, config: PipelineConfig) -> int:
    g = config.granger
    styles = read_trends_csv(args.styles, TrendKind.STYLE)
    topics = read_trends_csv(args.topics, TrendKind.TOPIC)
    cfg = GrangerConfig(q1=g.q1, q2=g.q2, alpha=g.alpha, intercept=g.intercept, fdr=g.fdr)
    screen = screen_all_pairs(styles.series, topics.series, cfg, config.threads)
    write_json(args.out, screen.to_dict())
    return 0


def cmd_forecast(args, config: PipelineConfig) -> int:
    f = config.forecast
    styles = read_trends_csv(args.styles, TrendKind.STYLE)
    topics = read_trends_csv(args.topics, TrendKind.TOPIC)
    influences = read_json(args.influences).get("influence_map", {})
    T = len(styles.empty_bins)
    train_bins = train_bins_for(config, T)
    benchmark = run_benchmark(styles.series, topics.series, influences, train_bins, forecast_methods(config),
                              f.horizon, f.metric, f.exo_mode, config.threads)
    write_json(args.out, benchmark.to_dict())
    if args.svg_dir:
        labels = bin_labels(styles.binning) if styles.binning else None
        forecast_charts(styles.series, benchmark, train_bins, Path(args.svg_dir), labels)
    return 0


def cmd_timeline(args, config: PipelineConfig) -> int:
    t = config.timeline
    styles = read_trends_csv(args.styles, TrendKind.STYLE)
    model = TopicModel.from_dict(read_json(args.model))
    influences = read_json(args.influences).get("influence_map", {})
    corpus = _corpus_for_model(args.corpus, model)
    binning = _trend_binning(styles, config, list(model.doc_dates))
    entries = build_timeline(styles.series, influences, model, corpus, binning, t.k, t.n_events, t.n_words,
                             config.threads)
    write_json(args.out, timeline_to_dict(entries, binning))
    if args.svg:
        emit_timeline_chart(entries, args.svg)
    return 0


def cmd_timestamp(args, config: PipelineConfig) -> int:
    mode = _MODES[args.mode]
    instances = read_instances(args.instances)
    model = TopicModel.from_dict(read_json(args.model))
    db = timestamp_database(config, instances, model)

    if args.action == "train":
        mapper, test_idx = fit_timestamper(config, db, with_mapper=mode == TimestampMode.VISUAL_PLUS_CULTURAL)
        write_json(args.out, {
            "version": __version__,
            "mode": mode.value,
            "mapper": mapper.to_dict() if mapper else None,
            "holdout_ids": [db.ids[i] for i in test_idx],
        })
        return 0

    if not args.mapper:
        raise ConfigError("timestamp eval needs --mapper")
    saved = read_json(args.mapper)
    mapper = CrossModalMapper.from_dict(saved["mapper"]) if saved.get("mapper") else None
    if mode == TimestampMode.VISUAL_PLUS_CULTURAL and mapper is None:
        raise InputError(f"{args.mapper} holds no trained mapper")
    position = {iid: i for i, iid in enumerate(db.ids)}
    test_idx = np.array([position[i] for i in saved.get("holdout_ids", []) if i in position], dtype=int)
    if len(test_idx) == 0:
        raise InputError("No held-out instances found in the database")
    if mode == TimestampMode.VISUAL_ONLY:
        mapper = None
    report = evaluate_holdout(db, test_idx, mapper, config.timestamp.normalize, config.threads)
    write_json(args.out, report.to_dict())
    return 0


def cmd_synth(args, config: PipelineConfig) -> int:
    scenario = SynthConfig.load(read_json(args.scenario)) if args.scenario else SynthConfig()
    seed = args.synth_seed if args.synth_seed is not None else args.seed
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})
    dataset = generate(scenario)
    out = Path(args.out)
    write_json(out / "scenario.json", scenario.model_dump(mode="json"))
    write_jsonl(out / "instances.jsonl", dataset.instances)
    write_jsonl(out / "documents.jsonl", dataset.documents)
    write_trends_csv(out / "style_trends.csv", dataset.styles)
    write_trends_csv(out / "topic_trends.csv", dataset.topics)
    write_json(out / "style_levels.json", dataset.style_levels)
    write_json(out / "ground_truth.json", dataset.truth.model_dump(mode="json"))
    return 0


def cmd_pipeline(args, config: PipelineConfig) -> int:
    result = run_pipeline(config)
    print(f"manifest: {result.manifest_path}")
    return result.exit_code


# ==================== Parser ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trendcause",
        description="Discover topic -> style influences and use them to forecast, chart and timestamp",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    # Synthesize a scenario and run everything on it
    %(prog)s synth --config scenario.json --seed 7 --out data/
    %(prog)s --config run.json pipeline --scenario scenario.json --out out/

    # Single stages
    %(prog)s topics --corpus c.jsonl --k 400 --iters 1000 --seed 7 --out model.json
    %(prog)s granger --styles s.csv --topics t.csv --q1 2 --q2 2 --alpha 0.05 --out results.json
    %(prog)s timeline --styles s.csv --influences results.json --model model.json \\
        --corpus c.jsonl --k 3 --out timeline.json --svg timeline.svg

Environment overrides use TRENDCAUSE_<SECTION>__<KEY>, e.g. TRENDCAUSE_GRANGER__ALPHA=0.01
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="Pipeline configuration JSON")
    parser.add_argument("--threads", dest="threads", type=int, help="Cap on worker threads")
    parser.add_argument("--seed", dest="seed", type=int, help="Seed for every random stage")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    # --seed is also accepted after the subcommand; absent there, the global value stands
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", dest="seed", type=int, default=argparse.SUPPRESS,
                        help="Seed for every random stage")

    p = sub.add_parser("cluster", parents=[seeded], help="Discover styles with Affinity Propagation")
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--assignments", help="Where to write style assignments (JSONL)")
    p.add_argument("--damping", dest="clustering.damping", type=float)
    p.add_argument("--max-iter", dest="clustering.max_iter", type=int)
    p.add_argument("--preference", dest="clustering.preference", type=float)
    p.add_argument("--entropy-direction", dest="clustering.entropy_direction", choices=["upper", "lower"])
    p.add_argument("--entropy-multiplier", dest="clustering.entropy_multiplier", type=float)
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("topics", parents=[seeded], help="Fit an LDA topic model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", dest="topics.n_topics", type=int)
    p.add_argument("--iters", "--iterations", dest="topics.iterations", type=int)
    p.add_argument("--alpha", dest="topics.alpha", type=float)
    p.add_argument("--beta", dest="topics.beta", type=float)
    p.add_argument("--min-doc-len", dest="topics.min_doc_len", type=int)
    p.set_defaults(handler=cmd_topics)

    p = sub.add_parser("trends", parents=[seeded], help="Build style and topic trend series")
    p.add_argument("--instances", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-styles", required=True)
    p.add_argument("--out-topics", required=True)
    p.add_argument("--origin", dest="binning.origin")
    p.add_argument("--width", dest="binning.width", type=int)
    p.add_argument("--unit", dest="binning.unit", choices=["days", "months", "years"])
    p.add_argument("--count", dest="binning.count", type=int)
    p.set_defaults(handler=cmd_trends)

    p = sub.add_parser("granger", parents=[seeded], help="Granger-test every style/topic pair")
    p.add_argument("--styles", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--q1", dest="granger.q1", type=int)
    p.add_argument("--q2", dest="granger.q2", type=int)
    p.add_argument("--alpha", dest="granger.alpha", type=float)
    p.add_argument("--intercept", dest="granger.intercept", action="store_const", const=True)
    p.add_argument("--fdr", dest="granger.fdr", action="store_const", const=True)
    p.set_defaults(handler=cmd_granger)

    p = sub.add_parser("forecast", parents=[seeded], help="Benchmark forecasters on every style")
    p.add_argument("--styles", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--influences", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg-dir", "--svg", dest="svg_dir")
    p.add_argument("--train-bins", dest="forecast.train_bins", type=int)
    p.add_argument("--horizon", dest="forecast.horizon", type=int)
    p.add_argument("--methods", "--method", dest="forecast.methods", nargs="+", choices=[m.value for m in MethodKind])
    p.add_argument("--metric", dest="forecast.metric", choices=["mse", "mae"])
    p.add_argument("--exp-alpha", dest="forecast.exp_alpha", type=float)
    p.add_argument("--exp-seed", dest="forecast.exp_seed", choices=["last", "first"])
    p.add_argument("--exo-forecast", dest="forecast.exo_mode", action="store_const", const="forecast")
    p.add_argument("--q1", dest="granger.q1", type=int)
    p.add_argument("--q2", dest="granger.q2", type=int)
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("timeline", parents=[seeded], help="Build a fashion-history timeline")
    p.add_argument("--styles", required=True)
    p.add_argument("--influences", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--k", dest="timeline.k", type=int)
    p.add_argument("--events", dest="timeline.n_events", type=int)
    p.set_defaults(handler=cmd_timeline)

    p = sub.add_parser("timestamp", parents=[seeded], help="Train or evaluate date prediction")
    p.add_argument("action", choices=["train", "eval"])
    p.add_argument("--instances", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mapper", help="Mapper written by 'timestamp train' (eval only)")
    p.add_argument("--mode", choices=sorted(_MODES), default="cultural")
    p.add_argument("--epochs", dest="timestamp.epochs", type=int)
    p.add_argument("--raw-distances", dest="timestamp.normalize", action="store_const", const=False)
    p.set_defaults(handler=cmd_timestamp)

    p = sub.add_parser("synth", help="Generate a synthetic scenario with planted structure")
    p.add_argument("--config", dest="scenario", help="Scenario JSON (SynthConfig)")
    p.add_argument("--seed", dest="synth_seed", type=int, help="Overrides the scenario seed")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("pipeline", parents=[seeded], help="Run every stage and write a manifest")
    p.add_argument("--scenario", dest="paths.scenario")
    p.add_argument("--instances", dest="paths.instances")
    p.add_argument("--documents", dest="paths.documents")
    p.add_argument("--out", dest="paths.output")
    p.set_defaults(handler=cmd_pipeline)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        overrides = _overrides(args)
        for key in ("threads", "seed"):
            if getattr(args, key, None) is not None:
                overrides[key] = getattr(args, key)
        config = load_config(args.config, overrides)
        return args.handler(args, config)
    except TrendCauseError as e:
        logger.error(str(e))
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 1
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
