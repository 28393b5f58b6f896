"""
Trend forecasting

Six long-horizon forecasters for style trends plus MSE/MAE evaluation:

- last, linear, mean, exp: closed-form baselines
- ar: least-squares autoregression rolled forward on its own predictions
- cultural: ensemble of autoregressions with exogenous topic inputs, one
  per Granger-causal topic, sharing the rolled-out style history

Lag convention: predicting x[s] uses x[s-1..s-q1] and y[s-1..s-q2].
Forecasters only ever see the training window of the style series.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError, DimensionMismatchError, InputError, InsufficientDataError, TrendCauseError
from .execution import ThreadedExecutor
from .influence import lag_matrix, ols_fit
from .models import ErrorMetric, ForecastReport, MethodKind, TrendSeries

logger = logging.getLogger(__name__)

EXO_OBSERVED = "observed"
EXO_FORECAST = "forecast"


# ==================== Configuration Models ====================

@dataclass
class ForecastMethod:
    """A forecasting method and its hyperparameters.

    Example:
        ForecastMethod.exp(alpha=0.3)
        ForecastMethod.cultural(q1=2, q2=2, influences=["topic_4"])
    """
    kind: MethodKind
    alpha: float = 0.3
    q1: int = 2
    q2: int = 2
    influences: Tuple[str, ...] = ()
    # "last" seeds the smoother at x_T, so its forecast equals Last;
    # "first" runs it across the training window from x_1.
    exp_seed: str = "last"

    def __post_init__(self):
        try:
            self.kind = MethodKind(self.kind)
        except ValueError as e:
            raise ConfigError(f"Unknown forecast method {self.kind!r}") from e
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("Exp alpha must lie in [0, 1]")
        if self.q1 < 1 or self.q2 < 1:
            raise ConfigError("q1 and q2 must be at least 1")
        if self.exp_seed not in ("last", "first"):
            raise ConfigError("exp_seed must be 'last' or 'first'")
        self.influences = tuple(self.influences)

    @property
    def name(self) -> str:
        return self.kind.value

    @classmethod
    def last(cls) -> "ForecastMethod":
        return cls(MethodKind.LAST)

    @classmethod
    def linear(cls) -> "ForecastMethod":
        return cls(MethodKind.LINEAR)

    @classmethod
    def mean(cls) -> "ForecastMethod":
        return cls(MethodKind.MEAN)

    @classmethod
    def exp(cls, alpha: float = 0.3, seed: str = "last") -> "ForecastMethod":
        return cls(MethodKind.EXP, alpha=alpha, exp_seed=seed)

    @classmethod
    def ar(cls, q1: int = 2) -> "ForecastMethod":
        return cls(MethodKind.AR, q1=q1)

    @classmethod
    def cultural(cls, q1: int = 2, q2: int = 2, influences: Sequence[str] = ()) -> "ForecastMethod":
        return cls(MethodKind.CULTURAL, q1=q1, q2=q2, influences=tuple(influences))

    def min_train(self) -> int:
        if self.kind == MethodKind.LINEAR:
            return 2
        if self.kind == MethodKind.AR:
            return self.q1 + 1
        if self.kind in (MethodKind.CULTURAL, MethodKind.CULTURAL_ALL):
            return max(self.q1, self.q2) + 1
        return 1


@dataclass
class Forecast:
    """Predictions over the horizon, raw and clipped to [0, 1]."""
    method: str
    raw: np.ndarray
    clipped: np.ndarray
    fallback: bool = False
    coefficients: Dict[str, List[float]] = field(default_factory=dict)


# ==================== Autoregression ====================

def _design(x: np.ndarray, q1: int, y: Optional[np.ndarray], q2: int, start: int) -> np.ndarray:
    columns = [lag_matrix(x, q1, start)]
    if y is not None:
        columns.append(lag_matrix(y[:len(x)], q2, start))
    return np.hstack(columns)


def fit_autoregression(x: np.ndarray, q1: int, y: Optional[np.ndarray] = None, q2: int = 1) -> np.ndarray:
    """Least-squares (AR)X coefficients, x lags first then y lags; no intercept."""
    start = max(q1, q2) if y is not None else q1
    if len(x) <= start:
        raise InsufficientDataError(f"Need more than {start} training points, got {len(x)}")
    fit = ols_fit(_design(x, q1, y, q2, start), x[start:])
    if fit.rank_deficient:
        logger.debug("Autoregression design is rank deficient")
    return fit.coefficients


def _one_step(history: List[float], s: int, coef: np.ndarray, q1: int,
              y: Optional[np.ndarray], q2: int) -> float:
    feats = [history[s - m] for m in range(1, q1 + 1)]
    if y is not None:
        feats.extend(y[s - m] for m in range(1, q2 + 1))
    return float(np.dot(coef, feats))


def _rollout(train: np.ndarray, models: Sequence[Tuple[np.ndarray, Optional[np.ndarray]]],
             q1: int, q2: int, horizon: int) -> np.ndarray:
    """Average the one-step predictions of every model over a shared history."""
    history = train.tolist()
    T = len(train)
    for h in range(horizon):
        s = T + h
        step = [_one_step(history, s, coef, q1, y, q2) for coef, y in models]
        history.append(float(np.mean(step)))
    return np.asarray(history[T:])


def _extend_exogenous(y: np.ndarray, T: int, horizon: int, q2: int) -> np.ndarray:
    """Roll a topic series forward past the training window with its own AR."""
    observed = y[:T]
    coef = fit_autoregression(observed, q2)
    future = _rollout(observed, [(coef, None)], q2, q2, horizon)
    return np.concatenate([observed, future])


# ==================== Forecast ====================

def forecast(
    method: ForecastMethod,
    train: TrendSeries,
    exogenous: Sequence[TrendSeries] = (),
    horizon: int = 1,
    exo_mode: str = EXO_OBSERVED,
) -> Forecast:
    """Predict ``horizon`` future values of ``train``.

    ``exogenous`` holds topic series covering at least the training window
    plus the horizon (``exo_mode="observed"``) or just the training window
    (``exo_mode="forecast"``, topics rolled forward with their own AR).
    """
    if horizon < 1:
        raise InputError("horizon must be at least 1")
    if exo_mode not in (EXO_OBSERVED, EXO_FORECAST):
        raise ConfigError(f"Unknown exogenous mode {exo_mode!r}")
    x = train.as_array()
    T = len(x)
    if T < method.min_train():
        raise InsufficientDataError(f"{method.name} needs {method.min_train()} training points, got {T}")

    kind = method.kind
    coefficients: Dict[str, List[float]] = {}
    fallback = False

    if kind == MethodKind.LAST:
        raw = np.full(horizon, x[-1])
    elif kind == MethodKind.LINEAR:
        m = (x[-1] - x[0]) / (T - 1)
        b = x[0]
        raw = m * np.arange(T, T + horizon) + b
    elif kind == MethodKind.MEAN:
        raw = np.full(horizon, x.mean())
    elif kind == MethodKind.EXP:
        if method.exp_seed == "last":
            # alpha*x_T + (1-alpha)*x_T
            level = x[-1]
        else:
            level = x[0]
            for value in x:
                level = method.alpha * value + (1.0 - method.alpha) * level
        raw = np.full(horizon, level)
    else:
        if kind == MethodKind.AR:
            topics: List[TrendSeries] = []
        elif kind == MethodKind.CULTURAL_ALL:
            topics = list(exogenous)
        else:
            available = {s.id: s for s in exogenous}
            missing = [tid for tid in method.influences if tid not in available]
            if missing:
                raise InputError(f"Influence topics not supplied: {missing}")
            topics = [available[tid] for tid in method.influences]

        if kind != MethodKind.AR and not topics:
            logger.warning(f"{train.id}: no influential topics; falling back to AR")
            fallback = True

        if not topics:
            coef = fit_autoregression(x, method.q1)
            coefficients["ar"] = coef.tolist()
            raw = _rollout(x, [(coef, None)], method.q1, method.q2, horizon)
        else:
            models = []
            for topic in topics:
                y = topic.as_array()
                if exo_mode == EXO_FORECAST:
                    if len(y) < T:
                        raise DimensionMismatchError(f"{topic.id} does not cover the training window")
                    y = _extend_exogenous(y, T, horizon, method.q2)
                elif len(y) < T + horizon:
                    raise DimensionMismatchError(
                        f"{topic.id} covers {len(y)} bins; need {T + horizon} for observed exogenous mode")
                coef = fit_autoregression(x, method.q1, y, method.q2)
                coefficients[topic.id] = coef.tolist()
                models.append((coef, y))
            raw = _rollout(x, models, method.q1, method.q2, horizon)

    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise TrendCauseError(f"{method.name} produced non-finite predictions for {train.id}")
    return Forecast(method=method.name, raw=raw, clipped=np.clip(raw, 0.0, 1.0),
                    fallback=fallback, coefficients=coefficients)


# ==================== Evaluation ====================

def evaluate(
    predictions: Sequence[float],
    truth: Sequence[float],
    metric: ErrorMetric = ErrorMetric.MSE,
    style_id: str = "",
    method: str = "",
    raw_predictions: Optional[Sequence[float]] = None,
    fallback: bool = False,
) -> ForecastReport:
    """Score predictions per time point and on average."""
    pred = np.asarray(predictions, dtype=float)
    true = np.asarray(truth, dtype=float)
    if pred.shape != true.shape:
        raise DimensionMismatchError(f"{len(pred)} predictions for {len(true)} truth values")
    metric = ErrorMetric(metric)
    diff = pred - true
    errors = diff ** 2 if metric == ErrorMetric.MSE else np.abs(diff)
    return ForecastReport(
        style_id=style_id,
        method=method,
        metric=metric,
        predictions=pred.tolist(),
        raw_predictions=list(raw_predictions) if raw_predictions is not None else pred.tolist(),
        per_step_errors=errors.tolist(),
        aggregate_error=float(errors.mean()) if len(errors) else 0.0,
        fallback=fallback,
    )


@dataclass
class BenchmarkSummary:
    """Per-method averages and the cultural-vs-AR comparison."""
    metric: ErrorMetric
    styles: int
    mean_error: Dict[str, float]
    cultural_beats_ar: Optional[float] = None
    cultural_improves_10pct: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "metric": self.metric.value,
            "styles": self.styles,
            "mean_error": self.mean_error,
            "cultural_beats_ar": self.cultural_beats_ar,
            "cultural_improves_10pct": self.cultural_improves_10pct,
        }


@dataclass
class Benchmark:
    reports: List[ForecastReport]
    summary: BenchmarkSummary
    errors: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "summary": self.summary.to_dict(),
            "reports": [r.model_dump(mode="json") for r in self.reports],
            "errors": self.errors,
        }


def summarize(reports: Sequence[ForecastReport], metric: ErrorMetric = ErrorMetric.MSE) -> BenchmarkSummary:
    by_method: Dict[str, List[float]] = {}
    by_style: Dict[str, Dict[str, float]] = {}
    for r in reports:
        by_method.setdefault(r.method, []).append(r.aggregate_error)
        by_style.setdefault(r.style_id, {})[r.method] = r.aggregate_error

    beats, improves, compared = 0, 0, 0
    for errors in by_style.values():
        if MethodKind.CULTURAL.value in errors and MethodKind.AR.value in errors:
            compared += 1
            ar_error = errors[MethodKind.AR.value]
            cultural_error = errors[MethodKind.CULTURAL.value]
            beats += cultural_error < ar_error
            improves += ar_error > 0 and (ar_error - cultural_error) / ar_error > 0.1

    return BenchmarkSummary(
        metric=ErrorMetric(metric),
        styles=len(by_style),
        mean_error={m: float(np.mean(v)) for m, v in by_method.items()},
        cultural_beats_ar=beats / compared if compared else None,
        cultural_improves_10pct=improves / compared if compared else None,
    )


def run_benchmark(
    styles: Sequence[TrendSeries],
    topics: Sequence[TrendSeries],
    influence_map: Mapping[str, Sequence[str]],
    train_bins: int,
    methods: Sequence[ForecastMethod],
    horizon: Optional[int] = None,
    metric: ErrorMetric = ErrorMetric.MSE,
    exo_mode: str = EXO_OBSERVED,
    threads: int = 1,
) -> Benchmark:
    """Forecast every style with every method from its first ``train_bins`` bins.

    Cultural methods take each style's influences from ``influence_map``.
    Reports are ordered by style id, then by the order of ``methods``. A
    failing method is recorded under ``"<style_id>|<method>"`` in
    ``errors``; the style's other methods are still reported.
    """
    styles = sorted(styles, key=lambda s: s.id)
    if not styles:
        raise InputError("No styles to forecast")
    T_total = len(styles[0])
    horizon = horizon if horizon is not None else T_total - train_bins
    if train_bins < 1 or horizon < 1 or train_bins + horizon > T_total:
        raise InputError(f"train_bins={train_bins} and horizon={horizon} do not fit {T_total} bins")

    def _style_reports(style: TrendSeries):
        values = style.as_array()
        train = TrendSeries(id=style.id, values=values[:train_bins].tolist(), kind=style.kind)
        truth = values[train_bins:train_bins + horizon]
        reports, failures = [], []
        for template in methods:
            method = template
            if template.kind == MethodKind.CULTURAL:
                method = ForecastMethod.cultural(template.q1, template.q2, influence_map.get(style.id, ()))
            try:
                result = forecast(method, train, topics, horizon, exo_mode)
            except TrendCauseError as e:
                failures.append((method.name, str(e)))
                continue
            reports.append(evaluate(result.clipped, truth, metric, style.id, method.name,
                                    raw_predictions=result.raw.tolist(), fallback=result.fallback))
        return reports, failures

    outcomes = ThreadedExecutor(threads, name="forecast").map(_style_reports, styles)

    reports: List[ForecastReport] = []
    errors: Dict[str, str] = {}
    for style, (style_reports, failures) in zip(styles, outcomes):
        for name, error in failures:
            errors[f"{style.id}|{name}"] = error
            logger.warning(f"Forecasting {style.id} with {name} failed: {error}")
        reports.extend(style_reports)

    summary = summarize(reports, metric)
    logger.info(f"Benchmark over {summary.styles} styles: " +
                ", ".join(f"{m}={e:.4f}" for m, e in summary.mean_error.items()))
    return Benchmark(reports=reports, summary=summary, errors=errors)
