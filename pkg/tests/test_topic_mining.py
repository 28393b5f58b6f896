"""
Unit tests for corpus building and LDA.
"""

import unittest

import numpy as np

from trendcause.exceptions import ConfigError, EmptyCorpusError, InputError
from trendcause.models import DocumentRecord
from trendcause.topic_mining import (
    TopicModel,
    build_corpus,
    document_purity,
    lda_fit,
    top_words,
)


def planted_corpus(n_per_vocab=200, vocab_size=50, doc_len=10, seed=0):
    """Two disjoint vocabularies; every document draws from exactly one."""
    rng = np.random.default_rng(seed)
    docs, truth = [], []
    for v in range(2):
        for j in range(n_per_vocab):
            words = rng.integers(0, vocab_size, size=doc_len)
            docs.append(DocumentRecord(doc_id=f"v{v}_{j:03d}", date="1950",
                                       tokens=[f"v{v}w{w}" for w in words]))
            truth.append(v)
    return docs, truth


class TestBuildCorpus(unittest.TestCase):
    """Test token and document filtering."""

    def test_short_documents_dropped(self):
        docs = [DocumentRecord(doc_id="a", date="1950", tokens=["x"] * 20),
                DocumentRecord(doc_id="b", date="1950", tokens=["y"] * 3)]
        corpus = build_corpus(docs, min_doc_len=15)
        self.assertEqual(corpus.doc_ids(), ["a"])
        self.assertEqual(corpus.vocabulary, ["x"])

    def test_stopwords_and_rare_tokens(self):
        docs = [DocumentRecord(doc_id="a", date="1950", tokens=["the", "hat", "hat", "rare"])]
        corpus = build_corpus(docs, min_doc_len=1, min_token_freq=2, stopwords=frozenset({"the"}))
        self.assertEqual(corpus.vocabulary, ["hat"])
        self.assertEqual(corpus.n_tokens, 2)

    def test_vocabulary_sorted(self):
        docs = [DocumentRecord(doc_id="a", date="1950", tokens=["zip", "army", "lace"])]
        corpus = build_corpus(docs, min_doc_len=1)
        self.assertEqual(corpus.vocabulary, ["army", "lace", "zip"])
        self.assertEqual(corpus.documents[0].tokens.tolist(), [2, 0, 1])

    def test_everything_filtered(self):
        docs = [DocumentRecord(doc_id="a", date="1950", tokens=["x"])]
        with self.assertRaises(EmptyCorpusError):
            build_corpus(docs, min_doc_len=15)


class TestLDA(unittest.TestCase):
    """Test collapsed Gibbs LDA on a planted corpus."""

    @classmethod
    def setUpClass(cls):
        docs, cls.truth = planted_corpus()
        cls.corpus = build_corpus(docs, min_doc_len=1)
        cls.model = lda_fit(cls.corpus, n_topics=2, alpha=0.5, iterations=500, seed=0)

    def test_purity(self):
        self.assertGreaterEqual(document_purity(self.model.theta, self.truth), 0.9)

    def test_rows_sum_to_one(self):
        np.testing.assert_allclose(self.model.theta.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        np.testing.assert_allclose(self.model.phi.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        self.assertTrue(np.all(self.model.theta > 0))
        self.assertTrue(np.all(self.model.phi > 0))

    def test_top_words_share_a_vocabulary(self):
        for k in range(2):
            words = top_words(self.model, k, 10)
            self.assertEqual(len({w[:2] for w in words}), 1)

    def test_log_likelihood_trace(self):
        self.assertEqual(len(self.model.log_likelihood), 50)
        self.assertTrue(all(np.isfinite(self.model.log_likelihood)))

    def test_dict_form(self):
        restored = TopicModel.from_dict(self.model.to_dict())
        np.testing.assert_array_equal(restored.theta, self.model.theta)
        self.assertEqual(restored.doc_ids, self.model.doc_ids)
        self.assertEqual(restored.n_topics, 2)


class TestLDADeterminism(unittest.TestCase):
    """Test seeding."""

    def setUp(self):
        docs, _ = planted_corpus(n_per_vocab=20, seed=1)
        self.corpus = build_corpus(docs, min_doc_len=1)

    def test_same_seed_same_model(self):
        a = lda_fit(self.corpus, n_topics=3, iterations=20, seed=42)
        b = lda_fit(self.corpus, n_topics=3, iterations=20, seed=42)
        np.testing.assert_array_equal(a.theta, b.theta)
        np.testing.assert_array_equal(a.phi, b.phi)

    def test_averaged_sweeps(self):
        model = lda_fit(self.corpus, n_topics=2, iterations=20, seed=0, average_last=5)
        np.testing.assert_allclose(model.theta.sum(axis=1), 1.0, rtol=0, atol=1e-9)

    def test_default_alpha(self):
        model = lda_fit(self.corpus, n_topics=4, iterations=2, seed=0)
        self.assertAlmostEqual(model.alpha, 12.5)

    def test_invalid_settings(self):
        with self.assertRaises(ConfigError):
            lda_fit(self.corpus, n_topics=0)
        with self.assertRaises(ConfigError):
            lda_fit(self.corpus, n_topics=2, iterations=0)

    def test_more_topics_than_tokens(self):
        docs = [DocumentRecord(doc_id="a", date="1950", tokens=["x", "y"])]
        with self.assertRaises(InputError):
            lda_fit(build_corpus(docs, min_doc_len=1), n_topics=3, iterations=1)

    def test_top_words_range(self):
        model = lda_fit(self.corpus, n_topics=2, iterations=2, seed=0)
        with self.assertRaises(InputError):
            top_words(model, 5, 3)


class TestLDAChain(unittest.TestCase):
    """Test the Gibbs chain's likelihood trace and count tables."""

    @classmethod
    def setUpClass(cls):
        docs, _ = planted_corpus(n_per_vocab=50, seed=2)
        cls.corpus = build_corpus(docs, min_doc_len=1)

    def test_smoothed_log_likelihood_rises(self):
        model = lda_fit(self.corpus, n_topics=2, alpha=0.5, iterations=200, seed=3, loglik_every=1)
        trace = np.asarray(model.log_likelihood)
        self.assertEqual(len(trace), 200)
        ma = np.convolve(trace, np.ones(20) / 20, mode="valid")
        self.assertGreater(ma[-1], ma[0])
        self.assertGreaterEqual(np.diff(ma).min(), -0.005 * abs(ma[0]))

    def test_count_tables_match_corpus(self):
        K, a, b = 3, 0.5, 0.01
        model = lda_fit(self.corpus, n_topics=K, alpha=a, beta=b, iterations=30, seed=4)
        V = len(self.corpus.vocabulary)
        nd = np.array([len(d.tokens) for d in self.corpus.documents])
        ndk = model.theta * (nd[:, None] + K * a) - a
        np.testing.assert_allclose(ndk, np.round(ndk), rtol=0, atol=1e-6)
        ndk = np.round(ndk)
        self.assertTrue(np.all(ndk >= 0))
        np.testing.assert_array_equal(ndk.sum(axis=1), nd)

        nk = ndk.sum(axis=0)
        nkw = model.phi * (nk[:, None] + V * b) - b
        np.testing.assert_allclose(nkw, np.round(nkw), rtol=0, atol=1e-6)
        nkw = np.round(nkw)
        self.assertTrue(np.all(nkw >= 0))
        words = np.concatenate([d.tokens for d in self.corpus.documents])
        np.testing.assert_array_equal(nkw.sum(axis=0), np.bincount(words, minlength=V))


if __name__ == "__main__":
    unittest.main()
