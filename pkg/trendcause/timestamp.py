"""
Timestamping

Predicts a clothing instance's date label by nearest-neighbor retrieval.
``visual_only`` retrieves by Euclidean distance between visual features.
``visual_plus_cultural`` also maps the query's visual feature into topic
space with a small MLP and averages the two (median-normalized) distances.

Each database entry's cultural feature is the mean topic distribution of
all documents sharing its date label.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .core import DateBinning, bin_of, bin_start
from .exceptions import (
    ConfigError, DateRangeError, DimensionMismatchError, DivergenceError, InputError, InsufficientDataError
)
from .execution import ThreadedExecutor
from .models import InstanceRecord, TimestampMode

logger = logging.getLogger(__name__)

ADAM = "adam"
SGD = "sgd"


# ==================== Configuration Models ====================

@dataclass
class MapperConfig:
    """Training settings of the visual -> cultural mapper."""
    hidden: Tuple[int, int] = (256, 128)
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 64
    seed: int = 0
    optimizer: str = ADAM

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ConfigError("hidden must hold two positive layer widths")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        if self.optimizer not in (ADAM, SGD):
            raise ConfigError(f"Unknown optimizer {self.optimizer!r}")


# ==================== Cross-Modal Mapper ====================

@dataclass
class CrossModalMapper:
    """Three-layer perceptron: ReLU, ReLU, identity."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    config: MapperConfig = field(default_factory=MapperConfig)
    final_loss: Optional[float] = None

    @classmethod
    def initialize(cls, d_in: int, d_out: int, config: MapperConfig) -> "CrossModalMapper":
        """He-normal weights and zero biases, drawn from ``config.seed``."""
        rng = np.random.default_rng(config.seed)
        dims = [d_in, *config.hidden, d_out]
        weights = [rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i], dims[i + 1]))
                   for i in range(3)]
        biases = [np.zeros(dims[i + 1]) for i in range(3)]
        return cls(weights=weights, biases=biases, config=config)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> List[np.ndarray]:
        """W1, b1, W2, b2, W3, b3 (live arrays)."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise DimensionMismatchError(f"Mapper expects {self.input_dim} features, got {X.shape[1]}")
        return X

    def _forward(self, X: np.ndarray):
        activations = [X]
        pre = []
        h = X
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < 2 else z
            activations.append(h)
        return activations, pre

    def forward(self, X: np.ndarray) -> np.ndarray:
        activations, _ = self._forward(self._check(X))
        return activations[-1]

    def hidden_activations(self, X: np.ndarray) -> List[np.ndarray]:
        activations, _ = self._forward(self._check(X))
        return activations[1:3]

    def loss_and_gradients(self, X: np.ndarray, Y: np.ndarray) -> Tuple[float, List[np.ndarray]]:
        """Mean squared error over all outputs and its gradient per parameter."""
        X = self._check(X)
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape != (X.shape[0], self.output_dim):
            raise DimensionMismatchError(f"Targets of shape {Y.shape}, expected {(X.shape[0], self.output_dim)}")
        activations, pre = self._forward(X)
        diff = activations[-1] - Y
        loss = float(np.mean(diff ** 2))

        grads: List[np.ndarray] = []
        delta = 2.0 * diff / diff.size
        for i in (2, 1, 0):
            if i < 2:
                delta = delta * (pre[i] > 0)
            grads = [activations[i].T @ delta, delta.sum(axis=0)] + grads
            delta = delta @ self.weights[i].T
        return loss, grads

    def to_dict(self) -> Dict:
        return {
            "hidden": list(self.config.hidden),
            "learning_rate": self.config.learning_rate,
            "epochs": self.config.epochs,
            "batch_size": self.config.batch_size,
            "seed": self.config.seed,
            "optimizer": self.config.optimizer,
            "final_loss": self.final_loss,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CrossModalMapper":
        try:
            config = MapperConfig(
                hidden=tuple(data["hidden"]), learning_rate=data["learning_rate"], epochs=data["epochs"],
                batch_size=data["batch_size"], seed=data["seed"], optimizer=data.get("optimizer", ADAM),
            )
            return cls(
                weights=[np.asarray(W, dtype=float) for W in data["weights"]],
                biases=[np.asarray(b, dtype=float) for b in data["biases"]],
                config=config,
                final_loss=data.get("final_loss"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Malformed mapper: {e}") from e


def train_mapper(X: np.ndarray, Y: np.ndarray, config: Optional[MapperConfig] = None) -> CrossModalMapper:
    """Fit the mapper by mini-batch gradient descent on mean squared error.

    Batches are reshuffled every epoch from ``config.seed``; a fixed seed
    reproduces the parameters exactly.
    """
    config = config or MapperConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] < 1:
        raise InputError("Need at least one training pair")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} inputs for {Y.shape[0]} targets")

    mapper = CrossModalMapper.initialize(X.shape[1], Y.shape[1], config)
    rng = np.random.default_rng(config.seed + 1)
    params = mapper.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    n = X.shape[0]

    logger.info(f"Training mapper {X.shape[1]}->{config.hidden}->{Y.shape[1]} on {n} pairs, "
                f"{config.epochs} epochs, {config.optimizer}, seed={config.seed}")
    loss = float("nan")
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, grads = mapper.loss_and_gradients(X[batch], Y[batch])
            step += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                if config.optimizer == SGD:
                    p -= config.learning_rate * g
                    continue
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                m_hat = mi / (1 - beta1 ** step)
                v_hat = vi / (1 - beta2 ** step)
                p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

        loss = float(np.mean((mapper.forward(X) - Y) ** 2))
        if not np.isfinite(loss):
            raise DivergenceError(f"Mapper loss became non-finite at epoch {epoch}", epoch=epoch)
        if epoch % 50 == 0 or epoch == config.epochs:
            logger.debug(f"Mapper epoch {epoch}: loss {loss:.6g}")

    mapper.final_loss = loss
    logger.info(f"Mapper trained: final loss {loss:.6g}")
    return mapper


# ==================== Timestamp Database ====================

def text_feature(label: str, doc_topics: np.ndarray, doc_labels: Sequence[str]) -> np.ndarray:
    """Mean topic distribution of the documents carrying ``label``."""
    theta = np.atleast_2d(np.asarray(doc_topics, dtype=float))
    if theta.shape[0] != len(doc_labels):
        raise DimensionMismatchError(f"{theta.shape[0]} topic rows for {len(doc_labels)} labels")
    mask = np.array([d == label for d in doc_labels], dtype=bool)
    if not mask.any():
        raise InputError(f"No documents carry date label {label}")
    v = theta[mask].mean(axis=0)
    return v / v.sum()


def date_label(when: str, binning: DateBinning) -> str:
    """Label of the label-bin containing ``when`` (its start date)."""
    return bin_start(bin_of(when, binning), binning).isoformat()


@dataclass
class TimestampDatabase:
    """Reference entries for retrieval."""
    ids: List[str]
    labels: List[str]
    visual: np.ndarray
    cultural: np.ndarray
    label_set: List[str]

    def __post_init__(self):
        n = len(self.ids)
        if len(self.labels) != n or self.visual.shape[0] != n or self.cultural.shape[0] != n:
            raise DimensionMismatchError("Database columns differ in length")
        # Ties resolve to the smallest entry id.
        self._id_rank = np.argsort(np.argsort(np.asarray(self.ids, dtype=object), kind="stable"), kind="stable")

    def __len__(self):
        return len(self.ids)

    def subset(self, indices: Sequence[int]) -> "TimestampDatabase":
        idx = np.asarray(indices, dtype=int)
        return TimestampDatabase(
            ids=[self.ids[i] for i in idx], labels=[self.labels[i] for i in idx],
            visual=self.visual[idx], cultural=self.cultural[idx], label_set=list(self.label_set),
        )

    def to_dict(self) -> Dict:
        return {
            "ids": list(self.ids),
            "labels": list(self.labels),
            "visual": self.visual.tolist(),
            "cultural": self.cultural.tolist(),
            "label_set": list(self.label_set),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TimestampDatabase":
        return cls(ids=list(data["ids"]), labels=list(data["labels"]),
                   visual=np.asarray(data["visual"], dtype=float),
                   cultural=np.asarray(data["cultural"], dtype=float),
                   label_set=list(data["label_set"]))


def build_database(
    instances: Sequence[InstanceRecord],
    label_binning: DateBinning,
    doc_topics: np.ndarray,
    doc_dates: Sequence[str],
) -> TimestampDatabase:
    """Attach each instance's label and its label's cultural feature.

    Instances whose label has no documents are dropped with a warning.
    """
    doc_labels = []
    keep_rows = []
    for j, when in enumerate(doc_dates):
        try:
            doc_labels.append(date_label(when, label_binning))
            keep_rows.append(j)
        except DateRangeError:
            continue
    theta = np.atleast_2d(np.asarray(doc_topics, dtype=float))[keep_rows]

    features: Dict[str, np.ndarray] = {}
    for label in sorted(set(doc_labels)):
        features[label] = text_feature(label, theta, doc_labels)

    ids, labels, visual, cultural = [], [], [], []
    dropped = 0
    for inst in instances:
        label = date_label(inst.date, label_binning)
        if label not in features:
            dropped += 1
            continue
        ids.append(inst.id)
        labels.append(label)
        visual.append(inst.features)
        cultural.append(features[label])
    if dropped:
        logger.warning(f"Dropped {dropped} instance(s) whose date label has no documents")
    if not ids:
        raise InputError("No instance shares a date label with the corpus")
    if len({len(v) for v in visual}) != 1:
        raise DimensionMismatchError("Instance feature vectors differ in length")

    present = set(labels)
    label_set = [label for label in (bin_start(k, label_binning).isoformat() for k in range(label_binning.count))
                 if label in present]
    logger.info(f"Timestamp database: {len(ids)} entries over {len(label_set)} labels")
    return TimestampDatabase(ids=ids, labels=labels, visual=np.asarray(visual, dtype=float),
                             cultural=np.asarray(cultural), label_set=label_set)


# ==================== Retrieval ====================

def _normalized(d: np.ndarray) -> np.ndarray:
    med = np.median(d, axis=-1, keepdims=True)
    return np.divide(d, med, out=d.copy(), where=med > 0)


def _distances(queries: np.ndarray, mapper: Optional[CrossModalMapper], db: TimestampDatabase,
               mode: TimestampMode, normalize: bool) -> np.ndarray:
    if queries.shape[1] != db.visual.shape[1]:
        raise DimensionMismatchError(f"Query has {queries.shape[1]} features, database {db.visual.shape[1]}")
    visual = cdist(queries, db.visual)
    if mode == TimestampMode.VISUAL_ONLY:
        return visual
    if mapper is None:
        raise ConfigError("visual_plus_cultural retrieval needs a trained mapper")
    if mapper.output_dim != db.cultural.shape[1]:
        raise DimensionMismatchError(f"Mapper outputs {mapper.output_dim} topics, database has {db.cultural.shape[1]}")
    textual = cdist(mapper.forward(queries), db.cultural)
    if normalize:
        visual, textual = _normalized(visual), _normalized(textual)
    return 0.5 * (visual + textual)


def predict_dates(
    queries: np.ndarray,
    mapper: Optional[CrossModalMapper],
    db: TimestampDatabase,
    mode: TimestampMode = TimestampMode.VISUAL_ONLY,
    normalize: bool = True,
    threads: int = 1,
    chunk: int = 256,
) -> List[str]:
    """Nearest-neighbor labels for every query row; ties by entry id."""
    if len(db) == 0:
        raise InputError("Timestamp database is empty")
    mode = TimestampMode(mode)
    Q = np.atleast_2d(np.asarray(queries, dtype=float))

    def _predict(start: int) -> List[str]:
        d = _distances(Q[start:start + chunk], mapper, db, mode, normalize)
        best = [int(np.lexsort((db._id_rank, row))[0]) for row in d]
        return [db.labels[j] for j in best]

    parts = ThreadedExecutor(threads, name="timestamp").map(_predict, range(0, Q.shape[0], chunk))
    return [label for part in parts for label in part]


def predict_date(
    query: Sequence[float],
    mapper: Optional[CrossModalMapper],
    db: TimestampDatabase,
    mode: TimestampMode = TimestampMode.VISUAL_ONLY,
    normalize: bool = True,
) -> str:
    return predict_dates(np.asarray(query, dtype=float)[None, :], mapper, db, mode, normalize)[0]


# ==================== Evaluation ====================

def split_holdout(n: int, fraction: float = 0.2, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Disjoint sorted (train, test) index arrays; ``fraction`` goes to test."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError("holdout fraction must lie in (0, 1)")
    if n < 2:
        raise InsufficientDataError(f"Cannot hold out from {n} instance(s)")
    n_test = min(max(1, int(round(fraction * n))), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def prior_accuracy(train_labels: Sequence[str], test_labels: Sequence[str]) -> float:
    """Accuracy of always predicting the most frequent training label."""
    if not test_labels:
        return 0.0
    counts = Counter(train_labels)
    prior = min(counts, key=lambda label: (-counts[label], label))
    return sum(label == prior for label in test_labels) / len(test_labels)


def eval_timestamp(
    db: TimestampDatabase,
    queries: np.ndarray,
    true_labels: Sequence[str],
    mode: TimestampMode = TimestampMode.VISUAL_ONLY,
    mapper: Optional[CrossModalMapper] = None,
    normalize: bool = True,
    threads: int = 1,
) -> float:
    """Fraction of queries whose predicted label is correct."""
    if len(true_labels) == 0:
        return 0.0
    predicted = predict_dates(queries, mapper, db, mode, normalize, threads)
    if len(predicted) != len(true_labels):
        raise DimensionMismatchError(f"{len(predicted)} predictions for {len(true_labels)} labels")
    return sum(p == t for p, t in zip(predicted, true_labels)) / len(true_labels)


@dataclass
class TimestampReport:
    visual_only: float
    visual_plus_cultural: Optional[float]
    prior: float
    train_size: int
    test_size: int
    labels: int

    def to_dict(self) -> Dict:
        return {
            "visual_only": self.visual_only,
            "visual_plus_cultural": self.visual_plus_cultural,
            "prior": self.prior,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "labels": self.labels,
        }


def evaluate_holdout(
    db: TimestampDatabase,
    test_indices: Sequence[int],
    mapper: Optional[CrossModalMapper],
    normalize: bool = True,
    threads: int = 1,
) -> TimestampReport:
    """Query held-out entries against the rest in both modes, plus the prior."""
    test = np.asarray(test_indices, dtype=int)
    train = np.setdiff1d(np.arange(len(db)), test)
    reference = db.subset(train)
    held = db.subset(test)
    visual = eval_timestamp(reference, held.visual, held.labels, TimestampMode.VISUAL_ONLY,
                            threads=threads)
    combined = None
    if mapper is not None:
        combined = eval_timestamp(reference, held.visual, held.labels, TimestampMode.VISUAL_PLUS_CULTURAL,
                                  mapper, normalize, threads)
    report = TimestampReport(visual_only=visual, visual_plus_cultural=combined,
                             prior=prior_accuracy(reference.labels, held.labels),
                             train_size=len(reference), test_size=len(held), labels=len(db.label_set))
    logger.info(f"Timestamping: visual_only={visual:.3f}, visual_plus_cultural={combined}, prior={report.prior:.3f}")
    return report
