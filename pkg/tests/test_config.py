"""
Unit tests for configuration loading.
"""

import json
import tempfile
import unittest
from pathlib import Path

from trendcause.config import PipelineConfig, env_overrides, load_config, merge
from trendcause.core import BinUnit
from trendcause.exceptions import ConfigError
from trendcause.models import MethodKind


class TestDefaults(unittest.TestCase):
    """Test documented defaults."""

    def test_defaults(self):
        config = load_config(environ={})
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.threads, 1)
        self.assertEqual(config.binning.width, 5)
        self.assertEqual(config.binning.unit, BinUnit.YEARS)
        self.assertEqual(config.clustering.damping, 0.9)
        self.assertEqual(config.topics.n_topics, 400)
        self.assertEqual(config.topics.min_doc_len, 15)
        self.assertEqual((config.granger.q1, config.granger.q2, config.granger.alpha), (2, 2, 0.05))
        self.assertEqual(config.timestamp.hidden, [256, 128])
        self.assertIn(MethodKind.CULTURAL, config.forecast.methods)

    def test_fingerprint_stable(self):
        self.assertEqual(PipelineConfig().fingerprint(), PipelineConfig().fingerprint())
        self.assertNotEqual(PipelineConfig().fingerprint(), PipelineConfig(seed=1).fingerprint())


class TestLayering(unittest.TestCase):
    """Test defaults < file < environment < overrides."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "config.json"
        self.path.write_text(json.dumps({"seed": 4, "granger": {"q1": 3, "q2": 3}, "topics": {"n_topics": 20}}))

    def tearDown(self):
        self.tmp.cleanup()

    def test_file(self):
        config = load_config(self.path, environ={})
        self.assertEqual(config.seed, 4)
        self.assertEqual(config.granger.q1, 3)
        self.assertEqual(config.granger.alpha, 0.05)

    def test_environment_beats_file(self):
        environ = {"TRENDCAUSE_GRANGER__Q1": "5", "TRENDCAUSE_SEED": "7", "OTHER": "x"}
        config = load_config(self.path, environ=environ)
        self.assertEqual(config.granger.q1, 5)
        self.assertEqual(config.granger.q2, 3)
        self.assertEqual(config.seed, 7)

    def test_overrides_beat_environment(self):
        config = load_config(self.path, overrides={"seed": 9, "topics": {"iterations": 50}},
                             environ={"TRENDCAUSE_SEED": "7"})
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.topics.iterations, 50)
        self.assertEqual(config.topics.n_topics, 20)

    def test_none_overrides_skipped(self):
        config = load_config(self.path, overrides={"seed": None}, environ={})
        self.assertEqual(config.seed, 4)


class TestEnvOverrides(unittest.TestCase):
    """Test environment parsing."""

    def test_values_parsed_as_json(self):
        overrides = env_overrides({
            "TRENDCAUSE_TIMESTAMP__HIDDEN": "[8, 4]",
            "TRENDCAUSE_GRANGER__FDR": "true",
            "TRENDCAUSE_PATHS__OUTPUT": "out/run",
            "TRENDCAUSE_LOG_LEVEL": "DEBUG",
        })
        self.assertEqual(overrides, {
            "timestamp": {"hidden": [8, 4]},
            "granger": {"fdr": True},
            "paths": {"output": "out/run"},
        })

    def test_merge_is_deep(self):
        merged = merge({"a": {"b": 1, "c": 2}}, {"a": {"c": 3}, "d": 4})
        self.assertEqual(merged, {"a": {"b": 1, "c": 3}, "d": 4})


class TestInvalid(unittest.TestCase):
    """Test rejected configurations."""

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            load_config(overrides={"granger": {"lags": 3}}, environ={})

    def test_bad_value(self):
        with self.assertRaises(ConfigError):
            load_config(overrides={"forecast": {"exo_mode": "oracle"}}, environ={})
        with self.assertRaises(ConfigError):
            load_config(overrides={"threads": 0}, environ={})

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/trendcause.json", environ={})

    def test_malformed_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.json"
            path.write_text("{seed: 1")
            with self.assertRaises(ConfigError):
                load_config(path, environ={})
            path.write_text("[1, 2]")
            with self.assertRaises(ConfigError):
                load_config(path, environ={})


if __name__ == "__main__":
    unittest.main()
