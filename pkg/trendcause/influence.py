"""
Influence screening

Granger-causality tests of every topic trend against every style trend.
A topic Granger-causes a style when adding the topic's lags to an
autoregression of the style lowers the residual sum of squares by more
than the F-test allows at significance level alpha.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import betainc, betaincinv

from .exceptions import (
    ConfigError, DimensionMismatchError, InputError, InsufficientDataError, TrendCauseError
)
from .execution import ThreadedExecutor
from .models import GrangerResult, TrendSeries

logger = logging.getLogger(__name__)

# RSS below this fraction of the target's energy counts as an exact fit.
_NEGLIGIBLE_RSS = 1e-12

SeriesLike = Union[TrendSeries, Sequence[float], np.ndarray]


# ==================== Configuration Models ====================

@dataclass
class GrangerConfig:
    """Lag windows and significance level of the Granger screen.

    Defaults are the century-scale setting; weekly data uses q1=4, q2=26.
    """
    q1: int = 2
    q2: int = 2
    alpha: float = 0.05
    intercept: bool = False
    fdr: bool = False

    def __post_init__(self):
        if self.q1 < 1 or self.q2 < 1:
            raise ConfigError("q1 and q2 must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")

    @property
    def max_lag(self) -> int:
        return max(self.q1, self.q2)

    def min_length(self) -> int:
        """Shortest series with T - max(q1, q2) > q1 + q2 + 1."""
        return self.max_lag + self.q1 + self.q2 + 2 + int(self.intercept)


@dataclass
class OLSFit:
    coefficients: np.ndarray
    rss: float
    rank_deficient: bool = False


@dataclass
class InfluenceScreen:
    """Result of ``screen_all_pairs``."""
    influence_map: Dict[str, List[str]]
    results: List[GrangerResult]
    errors: Dict[str, str] = field(default_factory=dict)

    @property
    def significant_styles(self) -> int:
        return sum(1 for topics in self.influence_map.values() if topics)

    def to_dict(self) -> Dict:
        return {
            "influence_map": self.influence_map,
            "results": [r.model_dump(mode="json") for r in self.results],
            "errors": self.errors,
            "significant_styles": self.significant_styles,
            "total_styles": len(self.influence_map),
        }


# ==================== Least Squares ====================

def ols_fit(design: np.ndarray, target: np.ndarray) -> OLSFit:
    """Least-squares coefficients and residual sum of squares.

    Rank-deficient designs are solved with the pseudo-inverse and flagged.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(target, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"design has {X.shape[0]} rows, target has {y.shape[0]}")
    if X.shape[0] < X.shape[1]:
        raise InsufficientDataError(f"{X.shape[0]} observations for {X.shape[1]} coefficients")

    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    rank_deficient = rank < X.shape[1]
    if rank_deficient:
        logger.debug(f"Rank-deficient design ({rank} < {X.shape[1]}); using pseudo-inverse")
        coef = np.linalg.pinv(X) @ y
    resid = y - X @ coef
    return OLSFit(coefficients=coef, rss=float(resid @ resid), rank_deficient=bool(rank_deficient))


def lag_matrix(values: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns v[t-1], ..., v[t-lags] for every t from ``start`` to the end."""
    v = np.asarray(values, dtype=float)
    return np.column_stack([v[start - m: len(v) - m] for m in range(1, lags + 1)])


# ==================== F Distribution ====================

def f_critical(d1: int, d2: int, alpha: float) -> float:
    """Upper-tail F(d1, d2) quantile: P(F > v) = alpha.

    Inverts the regularized incomplete beta function: if X ~ Beta(d1/2, d2/2)
    then F = (d2 X) / (d1 (1 - X)).
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if d1 < 1 or d2 < 1:
        raise ConfigError("degrees of freedom must be at least 1")
    x = float(betaincinv(d1 / 2.0, d2 / 2.0, 1.0 - alpha))
    return d2 * x / (d1 * (1.0 - x))


def f_pvalue(f_value: float, d1: int, d2: int) -> float:
    """Upper-tail probability P(F(d1, d2) > f_value)."""
    if not f_value > 0:
        return 1.0
    if np.isinf(f_value):
        return 0.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f_value)))


def benjamini_hochberg(p_values: Sequence[float], q: float) -> np.ndarray:
    """Step-up FDR control; True where the hypothesis is rejected."""
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    if m == 0:
        return np.zeros(0, dtype=bool)
    order = np.argsort(p, kind="stable")
    passed = p[order] <= q * np.arange(1, m + 1) / m
    reject = np.zeros(m, dtype=bool)
    if passed.any():
        cutoff = np.flatnonzero(passed).max()
        reject[order[:cutoff + 1]] = True
    return reject


# ==================== Granger Test ====================

def _series(obj: SeriesLike, default_id: str) -> Tuple[str, np.ndarray]:
    if isinstance(obj, TrendSeries):
        return obj.id, obj.as_array()
    values = np.asarray(obj, dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise InputError(f"Series {default_id} must be finite")
    return default_id, values


def granger_test(x: SeriesLike, y: SeriesLike, cfg: Optional[GrangerConfig] = None) -> GrangerResult:
    """Does topic trend ``y`` Granger-cause style trend ``x``?

    Restricted: x_t on x_{t-1..t-q1}. Unrestricted adds y_{t-1..t-q2}.
    Both fit the same targets t = max(q1, q2) .. T-1. Plain arrays are
    accepted in place of TrendSeries (ids "x" and "y").
    """
    cfg = cfg or GrangerConfig()
    x_id, xv = _series(x, "x")
    y_id, yv = _series(y, "y")
    if len(xv) != len(yv):
        raise DimensionMismatchError(f"{x_id} has {len(xv)} bins but {y_id} has {len(yv)}")
    if len(xv) < cfg.min_length():
        raise InsufficientDataError(
            f"Series of length {len(xv)} too short for q1={cfg.q1}, q2={cfg.q2} "
            f"(need {cfg.min_length()})")

    start = cfg.max_lag
    target = xv[start:]
    n_eff = len(target)
    restricted = lag_matrix(xv, cfg.q1, start)
    unrestricted = np.hstack([restricted, lag_matrix(yv, cfg.q2, start)])
    if cfg.intercept:
        ones = np.ones((n_eff, 1))
        restricted = np.hstack([ones, restricted])
        unrestricted = np.hstack([ones, unrestricted])

    fit_r = ols_fit(restricted, target)
    fit_u = ols_fit(unrestricted, target)
    rss_r = fit_r.rss
    rss_u = min(fit_u.rss, rss_r)

    d1 = cfg.q2
    d2 = n_eff - cfg.q1 - cfg.q2 - int(cfg.intercept)
    scale = float(target @ target)
    if rss_r <= _NEGLIGIBLE_RSS * max(scale, 1e-300):
        # x already explains itself (or is constant): no room for improvement.
        f_value = 0.0
    elif rss_u <= _NEGLIGIBLE_RSS * scale:
        f_value = float("inf")
    else:
        f_value = max((rss_r - rss_u) / d1, 0.0) / (rss_u / d2)

    critical = f_critical(d1, d2, cfg.alpha)
    coef = fit_u.coefficients
    offset = int(cfg.intercept)
    return GrangerResult(
        style_id=x_id,
        topic_id=y_id,
        f_value=f_value,
        f_critical=critical,
        p_value=f_pvalue(f_value, d1, d2),
        significant=bool(f_value > critical),
        rss_restricted=rss_r,
        rss_unrestricted=rss_u,
        alpha_coefficients=coef[offset:offset + cfg.q1].tolist(),
        beta_coefficients=coef[offset + cfg.q1:].tolist(),
        intercept=float(coef[0]) if cfg.intercept else None,
        df_num=d1,
        df_den=d2,
        n_effective=n_eff,
        rank_deficient=fit_r.rank_deficient or fit_u.rank_deficient,
    )


def _rank_topics(results: Sequence[GrangerResult]) -> List[str]:
    ranked = sorted((r for r in results if r.significant), key=lambda r: (-r.f_value, r.topic_id))
    return [r.topic_id for r in ranked]


def screen_all_pairs(
    styles: Sequence[TrendSeries],
    topics: Sequence[TrendSeries],
    cfg: Optional[GrangerConfig] = None,
    threads: int = 1,
) -> InfluenceScreen:
    """Granger-test every (style, topic) pair.

    Each style's influence set lists its significant topics by descending F,
    then topic id. Pair failures are recorded and skipped.
    """
    cfg = cfg or GrangerConfig()
    styles = sorted(styles, key=lambda s: s.id)
    topics = sorted(topics, key=lambda s: s.id)
    pairs: List[Tuple[TrendSeries, TrendSeries]] = [(s, t) for s in styles for t in topics]

    def _test(pair):
        style, topic = pair
        try:
            return granger_test(style, topic, cfg), None
        except TrendCauseError as e:
            return None, str(e)

    outcomes = ThreadedExecutor(threads, name="granger").map(_test, pairs)

    results: List[GrangerResult] = []
    errors: Dict[str, str] = {}
    for (style, topic), (result, error) in zip(pairs, outcomes):
        if result is None:
            errors[f"{style.id}|{topic.id}"] = error
            logger.warning(f"Granger test {style.id} <- {topic.id} failed: {error}")
        else:
            results.append(result)

    if cfg.fdr and results:
        reject = benjamini_hochberg([r.p_value for r in results], cfg.alpha)
        results = [r.model_copy(update={"significant": bool(flag)}) for r, flag in zip(results, reject)]

    by_style: Dict[str, List[GrangerResult]] = {s.id: [] for s in styles}
    for r in results:
        by_style[r.style_id].append(r)
    influence_map = {sid: _rank_topics(rs) for sid, rs in by_style.items()}

    screen = InfluenceScreen(influence_map=influence_map, results=results, errors=errors)
    logger.info(f"Granger screen: {len(results)} pairs, "
                f"{sum(r.significant for r in results)} significant, "
                f"{screen.significant_styles}/{len(styles)} styles influenced")
    return screen
