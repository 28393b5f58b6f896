"""
Topic mining

Builds an integer-coded corpus from dated, pre-tokenized documents and
fits an LDA topic model by collapsed Gibbs sampling.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .exceptions import ConfigError, EmptyCorpusError, InputError
from .models import DocumentRecord

logger = logging.getLogger(__name__)


# ==================== Corpus ====================

@dataclass
class CorpusDocument:
    doc_id: str
    date: str
    tokens: np.ndarray  # token ids


@dataclass
class Corpus:
    """Documents as token-id arrays plus the id -> word vocabulary."""
    documents: List[CorpusDocument]
    vocabulary: List[str]

    @property
    def n_tokens(self) -> int:
        return int(sum(len(d.tokens) for d in self.documents))

    def doc_ids(self) -> List[str]:
        return [d.doc_id for d in self.documents]

    def doc_dates(self) -> List[str]:
        return [d.date for d in self.documents]


def build_corpus(
    raw: Iterable[DocumentRecord],
    min_doc_len: int = 15,
    min_token_freq: int = 1,
    stopwords: FrozenSet[str] = frozenset(),
) -> Corpus:
    """Filter tokens, then documents, and assign stable token ids.

    Stopwords and tokens seen fewer than ``min_token_freq`` times across the
    corpus are removed first; documents left with fewer than ``min_doc_len``
    tokens are then dropped. Token ids follow the sorted vocabulary.
    """
    raw = list(raw)
    counts = Counter(tok for doc in raw for tok in doc.tokens if tok not in stopwords)
    keep = {tok for tok, c in counts.items() if c >= min_token_freq}

    filtered = []
    for doc in raw:
        tokens = [tok for tok in doc.tokens if tok in keep]
        if len(tokens) >= min_doc_len:
            filtered.append((doc, tokens))
    dropped = len(raw) - len(filtered)
    if dropped:
        logger.info(f"Dropped {dropped} document(s) shorter than {min_doc_len} tokens after filtering")
    if not filtered:
        raise EmptyCorpusError(f"No documents left after filtering {len(raw)} input document(s)")

    vocabulary = sorted({tok for _, tokens in filtered for tok in tokens})
    index = {tok: i for i, tok in enumerate(vocabulary)}
    documents = [
        CorpusDocument(doc_id=doc.doc_id, date=doc.date,
                       tokens=np.array([index[t] for t in tokens], dtype=np.int64))
        for doc, tokens in filtered
    ]
    logger.info(f"Corpus: {len(documents)} documents, {len(vocabulary)} types, "
                f"{sum(len(d.tokens) for d in documents)} tokens")
    return Corpus(documents=documents, vocabulary=vocabulary)


# ==================== Topic Model ====================

@dataclass
class LDAConfig:
    """Collapsed Gibbs LDA settings.

    alpha=None means 50/K. average_last > 0 averages theta/phi over that many
    final sweeps instead of reading only the last one.
    """
    n_topics: int = 400
    alpha: Optional[float] = None
    beta: float = 0.01
    iterations: int = 1000
    seed: int = 0
    average_last: int = 0
    loglik_every: int = 10

    def __post_init__(self):
        if self.n_topics < 1:
            raise ConfigError("n_topics must be at least 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.beta <= 0 or (self.alpha is not None and self.alpha <= 0):
            raise ConfigError("Dirichlet hyperparameters must be positive")
        if not 0 <= self.average_last <= self.iterations:
            raise ConfigError("average_last must lie in [0, iterations]")
        if self.loglik_every < 1:
            raise ConfigError("loglik_every must be at least 1")

    @property
    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.n_topics


@dataclass
class TopicModel:
    """K topic-word distributions and per-document topic distributions."""
    n_topics: int
    phi: np.ndarray
    theta: np.ndarray
    alpha: float
    beta: float
    seed: int
    vocabulary: List[str]
    doc_ids: List[str] = field(default_factory=list)
    doc_dates: List[str] = field(default_factory=list)
    log_likelihood: List[float] = field(default_factory=list)
    iterations: int = 0

    def to_dict(self) -> Dict:
        return {
            "K": self.n_topics,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "vocabulary": list(self.vocabulary),
            "doc_ids": list(self.doc_ids),
            "doc_dates": list(self.doc_dates),
            "log_likelihood": list(self.log_likelihood),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TopicModel":
        try:
            return cls(
                n_topics=int(data["K"]),
                phi=np.asarray(data["phi"], dtype=float),
                theta=np.asarray(data["theta"], dtype=float),
                alpha=float(data["alpha"]),
                beta=float(data["beta"]),
                seed=int(data["seed"]),
                vocabulary=list(data["vocabulary"]),
                doc_ids=list(data.get("doc_ids", [])),
                doc_dates=list(data.get("doc_dates", [])),
                log_likelihood=list(data.get("log_likelihood", [])),
                iterations=int(data.get("iterations", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Malformed topic model: {e}") from e

    def doc_topics_by_id(self) -> Dict[str, np.ndarray]:
        return {doc_id: self.theta[j] for j, doc_id in enumerate(self.doc_ids)}


def _log_likelihood(nkw: np.ndarray, nk: np.ndarray, ndk: np.ndarray, nd: np.ndarray,
                    alpha: float, beta: float) -> float:
    """Collapsed joint log p(w, z)."""
    K, V = nkw.shape
    word_part = (K * (gammaln(V * beta) - V * gammaln(beta))
                 + gammaln(nkw + beta).sum() - gammaln(nk + V * beta).sum())
    D = ndk.shape[0]
    doc_part = (D * (gammaln(K * alpha) - K * gammaln(alpha))
                + gammaln(ndk + alpha).sum() - gammaln(nd + K * alpha).sum())
    return float(word_part + doc_part)


def lda_fit(
    corpus: Corpus,
    n_topics: int,
    alpha: Optional[float] = None,
    beta: float = 0.01,
    iterations: int = 1000,
    seed: int = 0,
    average_last: int = 0,
    loglik_every: int = 10,
) -> TopicModel:
    """Fit LDA with a single collapsed Gibbs chain.

    theta_jk ∝ n_jk + alpha and phi_kw ∝ n_kw + beta from the final sweep's
    counts (or their average over the last ``average_last`` sweeps).
    Deterministic for a fixed seed.
    """
    cfg = LDAConfig(n_topics=n_topics, alpha=alpha, beta=beta, iterations=iterations,
                    seed=seed, average_last=average_last, loglik_every=loglik_every)
    K = cfg.n_topics
    a = cfg.resolved_alpha
    b = cfg.beta
    V = len(corpus.vocabulary)
    D = len(corpus.documents)
    words = np.concatenate([d.tokens for d in corpus.documents]).astype(np.int64)
    N = len(words)
    if K > N:
        raise InputError(f"K={K} exceeds the {N} tokens in the corpus")
    doc_of = np.repeat(np.arange(D), [len(d.tokens) for d in corpus.documents])

    rng = np.random.default_rng(cfg.seed)
    z = rng.integers(0, K, size=N)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)
    nd = ndk.sum(axis=1)
    v_beta = V * b

    theta_acc = np.zeros((D, K))
    phi_acc = np.zeros((K, V))
    trace: List[float] = []

    logger.info(f"LDA: K={K}, alpha={a:g}, beta={b:g}, {N} tokens, {iterations} sweeps, seed={cfg.seed}")
    for sweep in range(1, cfg.iterations + 1):
        u = rng.random(N)
        for i in range(N):
            d = doc_of[i]
            w = words[i]
            k = z[i]
            ndk[d, k] -= 1
            nkw[k, w] -= 1
            nk[k] -= 1

            p = (ndk[d] + a) * (nkw[:, w] + b) / (nk + v_beta)
            cum = np.cumsum(p)
            k = min(int(np.searchsorted(cum, u[i] * cum[-1], side="right")), K - 1)

            z[i] = k
            ndk[d, k] += 1
            nkw[k, w] += 1
            nk[k] += 1

        if sweep % cfg.loglik_every == 0 or sweep == cfg.iterations:
            trace.append(_log_likelihood(nkw, nk, ndk, nd, a, b))
            logger.debug(f"LDA sweep {sweep}: log-likelihood {trace[-1]:.3f}")
        if cfg.average_last and sweep > cfg.iterations - cfg.average_last:
            theta_acc += (ndk + a) / (nd[:, None] + K * a)
            phi_acc += (nkw + b) / (nk[:, None] + v_beta)

    if cfg.average_last:
        theta = theta_acc / cfg.average_last
        phi = phi_acc / cfg.average_last
    else:
        theta = (ndk + a) / (nd[:, None] + K * a)
        phi = (nkw + b) / (nk[:, None] + v_beta)
    theta /= theta.sum(axis=1, keepdims=True)
    phi /= phi.sum(axis=1, keepdims=True)

    return TopicModel(
        n_topics=K, phi=phi, theta=theta, alpha=a, beta=b, seed=cfg.seed,
        vocabulary=list(corpus.vocabulary), doc_ids=corpus.doc_ids(), doc_dates=corpus.doc_dates(),
        log_likelihood=trace, iterations=cfg.iterations,
    )


def top_words(model: TopicModel, topic: int, n: int) -> List[str]:
    """The ``n`` most probable words of a topic; ties by token id."""
    if not 0 <= topic < model.n_topics:
        raise InputError(f"Topic {topic} outside [0, {model.n_topics})")
    row = model.phi[topic]
    order = np.lexsort((np.arange(len(row)), -row))
    return [model.vocabulary[i] for i in order[:max(0, n)]]


def document_purity(theta: np.ndarray, true_topics: Sequence[int]) -> float:
    """Share of documents whose dominant topic matches its cluster's majority truth."""
    dominant = np.argmax(np.asarray(theta), axis=1)
    truth = np.asarray(true_topics)
    if len(truth) != len(dominant):
        raise InputError("true_topics must align with theta rows")
    matched = 0
    for k in np.unique(dominant):
        members = truth[dominant == k]
        matched += int(np.bincount(members).max())
    return matched / len(truth) if len(truth) else 0.0
