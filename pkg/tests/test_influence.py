"""
Unit tests for Granger influence screening.
"""

import json
import math
import unittest

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from trendcause.dataio import canonical_json
from trendcause.exceptions import ConfigError, DimensionMismatchError, InsufficientDataError
from trendcause.influence import (
    GrangerConfig,
    benjamini_hochberg,
    f_critical,
    f_pvalue,
    granger_test,
    ols_fit,
    screen_all_pairs,
)
from trendcause.models import GrangerResult, TrendKind, TrendSeries
from trendcause.synth import SynthConfig, generate, pair_precision_recall


def f_upper_tail(v, d1, d2):
    """P(F > v) by integrating the F density."""
    log_norm = (gammaln((d1 + d2) / 2) - gammaln(d1 / 2) - gammaln(d2 / 2)
                + (d1 / 2) * math.log(d1 / d2))

    def density(x):
        return math.exp(log_norm + (d1 / 2 - 1) * math.log(x) - ((d1 + d2) / 2) * math.log1p(d1 * x / d2))

    value, _ = quad(density, v, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return value


def _series(sid, values, kind=TrendKind.STYLE):
    return TrendSeries(id=sid, values=np.maximum(values, 0.0).tolist(), kind=kind)


class TestGrangerConfig(unittest.TestCase):
    """Test lag window validation."""

    def test_defaults(self):
        cfg = GrangerConfig()
        self.assertEqual((cfg.q1, cfg.q2, cfg.alpha), (2, 2, 0.05))

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            GrangerConfig(q1=0)
        with self.assertRaises(ConfigError):
            GrangerConfig(alpha=1.0)

    def test_min_length(self):
        # T - max(q1, q2) > q1 + q2 + 1
        cfg = GrangerConfig(q1=2, q2=3)
        T = cfg.min_length()
        self.assertGreater(T - 3, 2 + 3 + 1)
        self.assertLessEqual(T - 1 - 3, 2 + 3 + 1)


class TestOLS(unittest.TestCase):
    """Test least squares."""

    def test_planted_coefficients(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 4))
        beta = np.array([0.5, -1.0, 2.0, 0.25])
        fit = ols_fit(X, X @ beta)
        np.testing.assert_allclose(fit.coefficients, beta, atol=1e-8)
        self.assertLess(fit.rss, 1e-16)
        self.assertFalse(fit.rank_deficient)

    def test_rank_deficient_flagged(self):
        X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        fit = ols_fit(X, np.arange(10.0))
        self.assertTrue(fit.rank_deficient)
        self.assertLess(fit.rss, 1e-12)

    def test_underdetermined(self):
        with self.assertRaises(InsufficientDataError):
            ols_fit(np.ones((2, 3)), np.ones(2))


class TestFDistribution(unittest.TestCase):
    """Test the F quantile against numerical integration."""

    def test_known_values(self):
        self.assertAlmostEqual(f_critical(1, 10, 0.05), 4.9646, places=4)
        self.assertAlmostEqual(f_critical(2, 2, 0.05), 19.0, places=9)

    def test_grid_against_integration(self):
        for d1 in (1, 2, 4, 26):
            for d2 in (5, 10, 50, 100):
                for alpha in (0.01, 0.05):
                    v = f_critical(d1, d2, alpha)
                    tail = f_upper_tail(v, d1, d2)
                    self.assertLess(abs(tail - alpha) / alpha, 1e-5, f"F({d1},{d2}) at {alpha}")

    def test_pvalue_inverts_quantile(self):
        v = f_critical(3, 40, 0.05)
        self.assertAlmostEqual(f_pvalue(v, 3, 40), 0.05, places=9)
        self.assertEqual(f_pvalue(0.0, 3, 40), 1.0)

    def test_invalid_alpha(self):
        with self.assertRaises(ConfigError):
            f_critical(1, 1, 0.0)


class TestGrangerTest(unittest.TestCase):
    """Test the single-pair F test."""

    def test_white_noise_calibration(self):
        rng = np.random.default_rng(2024)
        rejections = 0
        for _ in range(1000):
            x = rng.normal(size=100)
            y = rng.normal(size=100)
            rejections += granger_test(x, y).significant
        self.assertGreaterEqual(rejections / 1000, 0.03)
        self.assertLessEqual(rejections / 1000, 0.08)

    def test_planted_cause_detected(self):
        rng = np.random.default_rng(7)
        hits = 0
        for _ in range(200):
            y = rng.normal(size=101)
            x = 0.9 * y[:-1] + 0.01 * rng.normal(size=100)
            hits += granger_test(x, y[1:]).significant
        self.assertGreaterEqual(hits, 190)

    def test_invariants(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.uniform(size=40)
            y = rng.uniform(size=40)
            result = granger_test(x, y)
            self.assertGreaterEqual(result.f_value, 0.0)
            self.assertLessEqual(result.rss_unrestricted, result.rss_restricted + 1e-9)
            self.assertEqual(result.significant, result.f_value > result.f_critical)
            self.assertEqual(result.df_num, 2)
            self.assertEqual(result.df_den, 38 - 4)

    def test_scale_invariance_in_cause(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(size=60)
        y = rng.uniform(size=60)
        base = granger_test(x, y).f_value
        for scale in (0.001, 3.0, 250.0):
            self.assertAlmostEqual(granger_test(x, scale * y).f_value, base, delta=1e-9 * max(1.0, base))

    def test_series_ids_carried(self):
        rng = np.random.default_rng(5)
        style = _series("style_1", rng.uniform(size=30))
        topic = _series("topic_2", rng.uniform(size=30), TrendKind.TOPIC)
        result = granger_test(style, topic)
        self.assertEqual((result.style_id, result.topic_id), ("style_1", "topic_2"))

    def test_intercept(self):
        rng = np.random.default_rng(6)
        result = granger_test(rng.uniform(size=40), rng.uniform(size=40), GrangerConfig(intercept=True))
        self.assertIsNotNone(result.intercept)
        self.assertEqual(result.df_den, 38 - 5)

    def test_exact_fit_written_as_null(self):
        y = np.random.default_rng(8).normal(size=41)
        # x_t = y_{t-1} exactly
        result = granger_test(y[:-1], y[1:])
        self.assertTrue(math.isinf(result.f_value))
        self.assertTrue(result.significant)
        data = json.loads(canonical_json(result.model_dump(mode="json")))
        self.assertIsNone(data["f_value"])
        self.assertTrue(data["f_infinite"])
        self.assertTrue(math.isinf(GrangerResult.model_validate(data).f_value))

    def test_constant_style(self):
        result = granger_test(np.full(30, 0.2), np.random.default_rng(0).uniform(size=30))
        self.assertEqual(result.f_value, 0.0)
        self.assertFalse(result.significant)

    def test_too_short(self):
        with self.assertRaises(InsufficientDataError):
            granger_test(np.ones(7), np.ones(7))

    def test_length_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            granger_test(np.ones(30), np.ones(31))


class TestBenjaminiHochberg(unittest.TestCase):
    """Test FDR control."""

    def test_step_up(self):
        reject = benjamini_hochberg([0.03, 0.01, 0.20, 0.02], 0.05)
        self.assertEqual(reject.tolist(), [True, True, False, True])

    def test_largest_passing_rank_wins(self):
        # 0.04 fails its own rank but 0.045 passes at rank 4
        reject = benjamini_hochberg([0.01, 0.04, 0.045, 0.045], 0.05)
        self.assertTrue(reject.all())

    def test_nothing_rejected(self):
        self.assertFalse(benjamini_hochberg([0.5, 0.9], 0.05).any())


class TestScreenAllPairs(unittest.TestCase):
    """Test the all-pairs screen."""

    def test_planted_influence_recovered(self):
        # 475 unplanted pairs at a calibrated 5% leave ~24 false hits against
        # 25 planted ones, so precision needs Benjamini-Hochberg control
        precisions, recalls = [], []
        for seed in range(3):
            data = generate(SynthConfig(seed=seed))
            screen = screen_all_pairs(data.styles.series, data.topics.series, GrangerConfig(fdr=True))
            precision, recall = pair_precision_recall(screen.influence_map, data.truth.adjacency())
            precisions.append(precision)
            recalls.append(recall)
        self.assertGreaterEqual(np.mean(precisions), 0.8)
        self.assertGreaterEqual(min(recalls), 0.8)

    def test_planted_influence_recall_uncorrected(self):
        for seed in range(3):
            data = generate(SynthConfig(seed=seed))
            screen = screen_all_pairs(data.styles.series, data.topics.series, GrangerConfig(alpha=0.05))
            _, recall = pair_precision_recall(screen.influence_map, data.truth.adjacency())
            self.assertGreaterEqual(recall, 0.8, f"seed {seed}")

    def test_null_styles_rejected_at_nominal_rate(self):
        flagged, tested = 0, 0
        for seed in range(3):
            data = generate(SynthConfig(seed=seed))
            causal = {link.style_id for link in data.truth.links}
            nulls = [s for s in data.styles.series if s.id not in causal]
            screen = screen_all_pairs(nulls, data.topics.series, GrangerConfig(alpha=0.05))
            flagged += sum(r.significant for r in screen.results)
            tested += len(screen.results)
        self.assertEqual(tested, 3 * 25 * 10)
        self.assertLessEqual(flagged / tested, 0.12)

    def test_ranked_by_f_value(self):
        data = generate(SynthConfig(seed=1, n_causal=4, n_null=2, n_topics=4))
        screen = screen_all_pairs(data.styles.series, data.topics.series)
        f_of = {(r.style_id, r.topic_id): r.f_value for r in screen.results}
        for style_id, topics in screen.influence_map.items():
            values = [f_of[(style_id, t)] for t in topics]
            self.assertEqual(values, sorted(values, reverse=True))

    def test_threads_do_not_change_result(self):
        data = generate(SynthConfig(seed=2, n_causal=4, n_null=4, n_topics=5))
        single = screen_all_pairs(data.styles.series, data.topics.series, threads=1)
        many = screen_all_pairs(data.styles.series, data.topics.series, threads=4)
        self.assertEqual(single.to_dict(), many.to_dict())

    def test_pair_errors_recorded(self):
        styles = [_series("style_0", np.linspace(0.1, 0.9, 30))]
        topics = [_series("topic_0", np.linspace(0.2, 0.3, 30), TrendKind.TOPIC),
                  _series("topic_1", np.linspace(0.2, 0.3, 29), TrendKind.TOPIC)]
        screen = screen_all_pairs(styles, topics)
        self.assertIn("style_0|topic_1", screen.errors)
        self.assertEqual(len(screen.results), 1)
        self.assertEqual(screen.to_dict()["total_styles"], 1)


if __name__ == "__main__":
    unittest.main()
