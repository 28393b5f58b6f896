"""
Unit tests for style discovery.

Tests affinity propagation, entropy scoring and the entropy filter.
"""

import math
import unittest

import numpy as np

from trendcause.exceptions import ConfigError, DimensionMismatchError, InputError, NoSignalError
from trendcause.models import InstanceRecord, StyleCluster
from trendcause.style_discovery import (
    APConfig,
    EntropyFilterRule,
    FilterDirection,
    FilterStatistics,
    affinity_propagation,
    cluster_entropy,
    discover_styles,
    filter_clusters,
    similarity_matrix,
)


def reference_ap(S, damping, max_iter, window):
    """Element-by-element message passing, same stopping rule."""
    n = len(S)
    R = [[0.0] * n for _ in range(n)]
    A = [[0.0] * n for _ in range(n)]
    previous, best, stable = None, None, 0
    for _ in range(max_iter):
        for i in range(n):
            scores = [A[i][k] + S[i][k] for k in range(n)]
            top = max(range(n), key=lambda k: scores[k])
            second = max(scores[k] for k in range(n) if k != top)
            for k in range(n):
                competing = second if k == top else scores[top]
                R[i][k] = damping * R[i][k] + (1 - damping) * (S[i][k] - competing)
        for k in range(n):
            positive = [max(0.0, R[i][k]) for i in range(n)]
            others = sum(positive) - positive[k]
            for i in range(n):
                if i == k:
                    computed = others
                else:
                    computed = min(0.0, R[k][k] + others - positive[i])
                A[i][k] = damping * A[i][k] + (1 - damping) * computed
        current = [k for k in range(n) if A[k][k] + R[k][k] > 0]
        stable = stable + 1 if current == previous else 0
        previous = current
        if current:
            best = current
        if stable >= window and current:
            break
    return best


def _activations(peak, n_labels=4, spread=0.0):
    row = [spread] * n_labels
    row[peak] += 1.0
    return row


class TestAPConfig(unittest.TestCase):
    """Test affinity propagation settings."""

    def test_defaults(self):
        config = APConfig()
        self.assertEqual(config.damping, 0.9)
        self.assertIsNone(config.preference)

    def test_damping_range(self):
        with self.assertRaises(ConfigError):
            APConfig(damping=1.0)
        with self.assertRaises(ConfigError):
            APConfig(damping=0.2)


class TestAffinityPropagation(unittest.TestCase):
    """Test message passing against an element-wise reference."""

    def test_matches_reference(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 21))
            centers = rng.normal(0.0, 4.0, size=(3, 2))
            X = centers[rng.integers(0, 3, size=n)] + rng.normal(0.0, 0.5, size=(n, 2))
            S = similarity_matrix(X)

            result = affinity_propagation(S, damping=0.9, max_iter=300, convergence_window=20)
            expected = reference_ap(S.tolist(), 0.9, 300, 20)

            self.assertEqual(result.exemplars.tolist(), expected, f"seed {seed}")

    def test_two_blobs(self):
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal(0.0, 0.1, size=(10, 2)), rng.normal(10.0, 0.1, size=(10, 2))])
        result = affinity_propagation(similarity_matrix(X))
        self.assertTrue(result.converged)
        self.assertEqual(len(result.clusters), 2)
        labels = result.labels
        self.assertEqual(len(set(labels[:10])), 1)
        self.assertEqual(len(set(labels[10:])), 1)

    def test_every_point_has_one_exemplar(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(15, 3))
        result = affinity_propagation(similarity_matrix(X), ids=[f"p{i}" for i in range(15)])
        members = [m for c in result.clusters for m in c.members]
        self.assertEqual(sorted(members), sorted(f"p{i}" for i in range(15)))
        for cluster in result.clusters:
            self.assertIn(cluster.exemplar, cluster.members)

    def test_single_point(self):
        result = affinity_propagation(np.array([[0.0]]))
        self.assertEqual(len(result.clusters), 1)
        self.assertTrue(result.converged)

    def test_identical_points_form_one_cluster(self):
        S = similarity_matrix(np.zeros((5, 2)), preference=-1.0)
        result = affinity_propagation(S)
        self.assertEqual(len(result.clusters), 1)
        self.assertEqual(len(result.clusters[0].members), 5)

    def test_not_converged_flag(self):
        rng = np.random.default_rng(3)
        result = affinity_propagation(similarity_matrix(rng.normal(size=(12, 2))), max_iter=2,
                                      convergence_window=50)
        self.assertFalse(result.converged)
        self.assertGreaterEqual(len(result.clusters), 1)

    def test_bad_matrix(self):
        with self.assertRaises(InputError):
            affinity_propagation(np.zeros((2, 3)))
        with self.assertRaises(DimensionMismatchError):
            affinity_propagation(np.zeros((2, 2)), ids=["a"])


class TestEntropy(unittest.TestCase):
    """Test cluster entropy."""

    def test_uniform_and_peaked(self):
        self.assertAlmostEqual(cluster_entropy(np.ones((3, 8))), 3.0)
        self.assertEqual(cluster_entropy(np.array([[0.0, 2.0, 0.0]])), 0.0)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            H = rng.uniform(0.0, 1.0, size=(5, 6))
            entropy = cluster_entropy(H)
            self.assertGreaterEqual(entropy, 0.0)
            self.assertLessEqual(entropy, math.log2(6) + 1e-12)

    def test_invariant_to_member_order_label_order_and_scale(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            H = rng.uniform(0.0, 1.0, size=(6, 7))
            base = cluster_entropy(H)
            shuffled = H[rng.permutation(6)][:, rng.permutation(7)]
            self.assertAlmostEqual(cluster_entropy(shuffled), base, delta=1e-12)
            for scale in (1e-3, 4.0, 1e3):
                self.assertAlmostEqual(cluster_entropy(scale * H), base, delta=1e-12)

    def test_no_signal(self):
        with self.assertRaises(NoSignalError):
            cluster_entropy(np.zeros((2, 4)))

    def test_label_count_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            cluster_entropy(np.ones((2, 4)), label_set_size=5)


class TestEntropyFilter(unittest.TestCase):
    """Test the mean +/- k sigma entropy threshold."""

    def _clusters(self, entropies):
        return [StyleCluster(style_id=f"style_{i}", exemplar=f"x{i}", members=[f"x{i}"], entropy=e)
                for i, e in enumerate(entropies)]

    def test_outlier_removed(self):
        kept = filter_clusters(self._clusters([1.0, 1.0, 1.0, 10.0]))
        self.assertEqual([c.style_id for c in kept], ["style_0", "style_1", "style_2"])

    def test_population_statistics_keep_outlier(self):
        rule = EntropyFilterRule(statistics=FilterStatistics.POPULATION)
        kept = filter_clusters(self._clusters([1.0, 1.0, 1.0, 10.0]), rule)
        self.assertEqual(len(kept), 4)

    def test_ties_retained(self):
        kept = filter_clusters(self._clusters([2.0, 2.0, 2.0]))
        self.assertEqual(len(kept), 3)

    def test_lower_direction(self):
        rule = EntropyFilterRule(direction=FilterDirection.LOWER, multiplier=0.5,
                                 statistics=FilterStatistics.POPULATION)
        kept = filter_clusters(self._clusters([0.5, 2.0, 2.1, 2.2]), rule)
        self.assertEqual([c.style_id for c in kept], ["style_0"])

    def test_single_cluster_retained(self):
        self.assertEqual(len(filter_clusters(self._clusters([4.0]))), 1)

    def test_negative_multiplier(self):
        with self.assertRaises(ConfigError):
            EntropyFilterRule(multiplier=-1.0)


class TestDiscoverStyles(unittest.TestCase):
    """Test the end-to-end discovery step."""

    def test_blobs_become_styles(self):
        rng = np.random.default_rng(5)
        instances = []
        for blob in range(3):
            for j in range(8):
                features = (np.full(2, 10.0 * blob) + rng.normal(0.0, 0.2, size=2)).tolist()
                instances.append(InstanceRecord(id=f"b{blob}_{j}", date="1950", features=features,
                                                activations=_activations(blob, spread=0.05)))

        discovery = discover_styles(instances, label_names=["collar", "floral", "denim", "lace"])

        self.assertEqual(len(discovery.clusters), 3)
        self.assertEqual(len(discovery.retained), 3)
        self.assertEqual(len(discovery.assignments), 24)
        top = sorted(c.top_labels[0] for c in discovery.retained)
        self.assertEqual(top, ["collar", "denim", "floral"])

    def test_without_activations(self):
        instances = [InstanceRecord(id=f"i{j}", date="1950", features=[float(j)]) for j in range(4)]
        discovery = discover_styles(instances)
        self.assertEqual(len(discovery.retained), len(discovery.clusters))
        self.assertIn("entropy filtering skipped: no activations", discovery.warnings)

    def test_mixed_dimensions(self):
        instances = [InstanceRecord(id="a", date="1950", features=[0.0]),
                     InstanceRecord(id="b", date="1950", features=[0.0, 1.0])]
        with self.assertRaises(DimensionMismatchError):
            discover_styles(instances)

    def test_empty(self):
        with self.assertRaises(InputError):
            discover_styles([])


if __name__ == "__main__":
    unittest.main()
