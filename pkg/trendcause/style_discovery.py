"""
Style discovery

Clusters instance feature vectors into candidate styles with Affinity
Propagation, scores each cluster by the entropy of its aggregated
attribute activations and keeps the coherent (low-entropy) ones.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import ConfigError, DimensionMismatchError, InputError, NoSignalError
from .models import InstanceRecord, StyleAssignment, StyleCluster

logger = logging.getLogger(__name__)


# ==================== Configuration Models ====================

@dataclass
class APConfig:
    """Affinity Propagation settings.

    preference=None uses the median off-diagonal similarity.
    """
    damping: float = 0.9
    max_iter: int = 1000
    convergence_window: int = 50
    preference: Optional[float] = None

    def __post_init__(self):
        if not 0.5 <= self.damping < 1.0:
            raise ConfigError("damping must lie in [0.5, 1)")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.convergence_window < 1:
            raise ConfigError("convergence_window must be at least 1")


class FilterDirection(str, Enum):
    UPPER = "upper"  # drop high-entropy outliers: keep E <= mu + k*sigma
    LOWER = "lower"  # keep only the best: keep E <= mu - k*sigma


class FilterStatistics(str, Enum):
    """Which clusters the threshold mean and standard deviation come from.

    POPULATION: all scored clusters, the cluster under test included.
    LEAVE_ONE_OUT: every other cluster; a cluster never enters its own threshold.
    """
    POPULATION = "population"
    LEAVE_ONE_OUT = "leave_one_out"


@dataclass
class EntropyFilterRule:
    """Entropy threshold rule for ``filter_clusters``.

    The threshold is mu + k*sigma (UPPER) or mu - k*sigma (LOWER), with k
    the ``multiplier`` and sigma the population standard deviation.

    POPULATION takes mu and sigma over all clusters. LEAVE_ONE_OUT (the
    default) takes them over the other clusters only, so a lone outlier
    cannot inflate the spread it is judged by. With entropies {1, 1, 1, 10}
    and k=2 the population threshold is 3.25 + 2*3.90 = 11.04 and keeps the
    outlier; leave-one-out judges it against {1, 1, 1} (threshold 1.0) and
    drops it.
    """
    direction: FilterDirection = FilterDirection.UPPER
    multiplier: float = 2.0
    statistics: FilterStatistics = FilterStatistics.LEAVE_ONE_OUT

    def __post_init__(self):
        self.direction = FilterDirection(self.direction)
        self.statistics = FilterStatistics(self.statistics)
        if self.multiplier < 0:
            raise ConfigError("multiplier must be nonnegative")

    def threshold(self, reference: np.ndarray) -> float:
        mu = float(np.mean(reference))
        sigma = float(np.std(reference))
        sign = 1.0 if self.direction == FilterDirection.UPPER else -1.0
        return mu + sign * self.multiplier * sigma


@dataclass
class ClusteringResult:
    """Output of ``affinity_propagation``."""
    clusters: List[StyleCluster]
    labels: np.ndarray
    exemplars: np.ndarray
    converged: bool
    iterations: int


@dataclass
class StyleDiscovery:
    """Output of ``discover_styles``."""
    clusters: List[StyleCluster]
    retained: List[StyleCluster]
    assignments: List[StyleAssignment]
    converged: bool
    iterations: int
    warnings: List[str] = field(default_factory=list)


# ==================== Similarity ====================

def similarity_matrix(features: np.ndarray, preference: Optional[float] = None) -> np.ndarray:
    """Negative squared Euclidean similarities with preferences on the diagonal."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[0] == 0:
        raise InputError("Cannot build a similarity matrix for zero instances")
    if not np.all(np.isfinite(X)):
        raise InputError("Features must be finite")

    S = -cdist(X, X, metric="sqeuclidean")
    n = S.shape[0]
    if preference is None:
        preference = float(np.median(S[~np.eye(n, dtype=bool)])) if n > 1 else 0.0
    np.fill_diagonal(S, preference)
    return S


# ==================== Affinity Propagation ====================

def _exemplars_to_clusters(S: np.ndarray, exemplars: np.ndarray, ids: Sequence[str]):
    exemplars = np.sort(exemplars)
    c = np.argmax(S[:, exemplars], axis=1)
    c[exemplars] = np.arange(len(exemplars))
    labels = exemplars[c]

    clusters = []
    for j, k in enumerate(exemplars):
        members = [ids[i] for i in np.flatnonzero(labels == k)]
        clusters.append(StyleCluster(style_id=f"style_{j}", exemplar=ids[k], members=members))
    return clusters, labels, exemplars


def affinity_propagation(
    sim: np.ndarray,
    damping: float = 0.9,
    max_iter: int = 1000,
    convergence_window: int = 50,
    ids: Optional[Sequence[str]] = None,
) -> ClusteringResult:
    """Cluster by responsibility/availability message passing.

    Every iteration damps both messages: new = damping*old + (1-damping)*computed.
    Converges once the exemplar set is unchanged for ``convergence_window``
    consecutive iterations; otherwise the last non-empty exemplar set is
    returned with ``converged=False``.
    """
    APConfig(damping=damping, max_iter=max_iter, convergence_window=convergence_window)
    S = np.array(sim, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] == 0:
        raise InputError("Similarity matrix must be square and non-empty")
    if not np.all(np.isfinite(S)):
        raise InputError("Similarity matrix must be finite")

    n = S.shape[0]
    ids = list(ids) if ids is not None else [str(i) for i in range(n)]
    if len(ids) != n:
        raise DimensionMismatchError(f"{len(ids)} ids for {n} instances")

    if n == 1:
        clusters, labels, exemplars = _exemplars_to_clusters(S, np.array([0]), ids)
        return ClusteringResult(clusters, labels, exemplars, converged=True, iterations=0)

    off_diagonal = S[~np.eye(n, dtype=bool)]
    if np.all(off_diagonal == off_diagonal[0]):
        # No structure to pass messages over: one cluster unless every point prefers itself.
        if np.all(np.diag(S) > off_diagonal[0]):
            exemplars = np.arange(n)
        else:
            exemplars = np.array([0])
        clusters, labels, exemplars = _exemplars_to_clusters(S, exemplars, ids)
        logger.info(f"Degenerate similarity matrix: {len(clusters)} cluster(s)")
        return ClusteringResult(clusters, labels, exemplars, converged=True, iterations=0)

    rows = np.arange(n)
    R = np.zeros((n, n))
    A = np.zeros((n, n))
    previous = None
    best = None
    stable = 0
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        # Responsibilities
        AS = A + S
        first_idx = np.argmax(AS, axis=1)
        first = AS[rows, first_idx]
        AS[rows, first_idx] = -np.inf
        second = np.max(AS, axis=1)
        R_new = S - first[:, None]
        R_new[rows, first_idx] = S[rows, first_idx] - second
        R = damping * R + (1.0 - damping) * R_new

        # Availabilities
        Rp = np.maximum(R, 0.0)
        np.fill_diagonal(Rp, np.diag(R))
        A_new = Rp.sum(axis=0)[None, :] - Rp
        self_availability = np.diag(A_new).copy()
        A_new = np.minimum(A_new, 0.0)
        np.fill_diagonal(A_new, self_availability)
        A = damping * A + (1.0 - damping) * A_new

        current = np.flatnonzero((np.diag(A) + np.diag(R)) > 0)
        if previous is not None and np.array_equal(current, previous):
            stable += 1
        else:
            stable = 0
        previous = current
        if len(current):
            best = current
        if stable >= convergence_window and len(current):
            converged = True
            break

    if not converged:
        logger.warning(f"Affinity propagation did not converge in {max_iter} iterations")
    if best is None:
        best = np.array([int(np.argmax(np.diag(A) + np.diag(R)))])

    clusters, labels, exemplars = _exemplars_to_clusters(S, best, ids)
    logger.info(f"Affinity propagation: {len(clusters)} clusters after {iteration} iterations")
    return ClusteringResult(clusters, labels, exemplars, converged=converged, iterations=iteration)


# ==================== Cluster Quality ====================

def aggregate_activations(activations: np.ndarray, label_set_size: Optional[int] = None) -> np.ndarray:
    """Summed member activations normalized to a probability vector."""
    H = np.asarray(activations, dtype=float)
    if H.ndim == 2:
        H = H.sum(axis=0)
    if label_set_size is not None and H.shape[0] != label_set_size:
        raise DimensionMismatchError(f"Expected {label_set_size} labels, got {H.shape[0]}")
    if np.any(H < 0):
        raise InputError("Activations must be nonnegative")
    total = H.sum()
    if total <= 0:
        raise NoSignalError("no signal in cluster")
    return H / total


def cluster_entropy(activations: np.ndarray, label_set_size: Optional[int] = None) -> float:
    """Base-2 Shannon entropy of a cluster's aggregated label distribution."""
    p = aggregate_activations(activations, label_set_size)
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    return min(max(entropy, 0.0), float(np.log2(len(p))) if len(p) > 1 else 0.0)


def score_clusters(
    clusters: Sequence[StyleCluster],
    instances: Sequence[InstanceRecord],
    label_names: Optional[Sequence[str]] = None,
    top_n: int = 5,
) -> List[StyleCluster]:
    """Attach entropy and ranked top labels to each cluster.

    Clusters whose members carry no activation mass keep ``entropy=None``.
    """
    by_id = {inst.id: inst for inst in instances}
    scored = []
    for cluster in clusters:
        rows = [by_id[m].activations for m in cluster.members if by_id[m].activations is not None]
        if not rows:
            scored.append(cluster)
            continue
        matrix = np.asarray(rows, dtype=float)
        names = list(label_names) if label_names is not None else [f"label_{i}" for i in range(matrix.shape[1])]
        try:
            p = aggregate_activations(matrix, len(names))
        except NoSignalError:
            logger.warning(f"{cluster.style_id}: no signal in cluster")
            scored.append(cluster)
            continue
        order = np.lexsort((np.arange(len(p)), -p))
        top = [names[i] for i in order[:top_n] if p[i] > 0]
        scored.append(cluster.model_copy(update={
            "entropy": cluster_entropy(matrix, len(names)),
            "top_labels": top,
        }))
    return scored


def filter_clusters(
    clusters: Sequence[StyleCluster],
    rule: Optional[EntropyFilterRule] = None,
) -> List[StyleCluster]:
    """Keep clusters whose entropy passes the threshold (ties retained)."""
    rule = rule or EntropyFilterRule()
    scored = [c for c in clusters if c.entropy is not None]
    if len(scored) < len(clusters):
        logger.warning(f"Dropping {len(clusters) - len(scored)} cluster(s) without an entropy score")
    if len(scored) < 2:
        logger.warning(f"Entropy filter needs at least 2 clusters, got {len(scored)}; retaining all")
        return list(scored)

    entropies = np.array([c.entropy for c in scored])
    kept = []
    for i, cluster in enumerate(scored):
        if rule.statistics == FilterStatistics.LEAVE_ONE_OUT:
            reference = np.delete(entropies, i)
        else:
            reference = entropies
        if cluster.entropy <= rule.threshold(reference):
            kept.append(cluster)

    logger.info(f"Entropy filter kept {len(kept)}/{len(scored)} clusters")
    return kept


def assignments_from_clusters(clusters: Sequence[StyleCluster]) -> List[StyleAssignment]:
    return [StyleAssignment(instance_id=m, style_id=c.style_id) for c in clusters for m in c.members]


def discover_styles(
    instances: Sequence[InstanceRecord],
    config: Optional[APConfig] = None,
    rule: Optional[EntropyFilterRule] = None,
    label_names: Optional[Sequence[str]] = None,
    top_n: int = 5,
) -> StyleDiscovery:
    """Similarity -> AP -> entropy scoring -> filtering -> style assignments."""
    config = config or APConfig()
    if not instances:
        raise InputError("No instances to cluster")
    dims = {len(inst.features) for inst in instances}
    if len(dims) != 1:
        raise DimensionMismatchError(f"Feature dimensions differ across instances: {sorted(dims)}")

    features = np.asarray([inst.features for inst in instances], dtype=float)
    S = similarity_matrix(features, config.preference)
    result = affinity_propagation(S, config.damping, config.max_iter, config.convergence_window,
                                  ids=[inst.id for inst in instances])

    warnings = [] if result.converged else ["affinity propagation did not converge"]
    has_activations = any(inst.activations is not None for inst in instances)
    if has_activations:
        clusters = score_clusters(result.clusters, instances, label_names, top_n)
        retained = filter_clusters(clusters, rule)
    else:
        logger.warning("No activations present; entropy filtering skipped")
        warnings.append("entropy filtering skipped: no activations")
        clusters = result.clusters
        retained = list(clusters)

    return StyleDiscovery(
        clusters=clusters,
        retained=retained,
        assignments=assignments_from_clusters(retained),
        converged=result.converged,
        iterations=result.iterations,
        warnings=warnings,
    )
