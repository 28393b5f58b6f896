"""
Integration tests for the end-to-end pipeline.
"""

import json
import tempfile
import unittest
from pathlib import Path

from trendcause.config import load_config
from trendcause.exceptions import InputError
from trendcause.pipeline import STAGES, run_pipeline

SCENARIO = {
    "seed": 11,
    "bin_count": 20,
    "n_topics": 3,
    "n_causal": 3,
    "n_null": 3,
    "instances_per_bin": 8,
    "docs_per_bin": 4,
    "doc_length": 10,
    "feature_dim": 3,
}


def small_run(tmp: Path, **sections):
    scenario = tmp / "scenario.json"
    scenario.write_text(json.dumps(SCENARIO))
    overrides = {
        "binning": {"width": 1, "origin": "1900-01-01"},
        "topics": {"n_topics": 3, "iterations": 10, "min_doc_len": 5},
        "timestamp": {"hidden": [8, 8], "epochs": 5},
        "paths": {"scenario": str(scenario), "output": str(tmp / "out")},
    }
    for name, values in sections.items():
        overrides.setdefault(name, {}).update(values)
    return load_config(overrides=overrides, environ={})


class TestRunPipeline(unittest.TestCase):
    """Test a full run on a small synthetic scenario."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.config = small_run(cls.dir)
        cls.result = run_pipeline(cls.config)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_all_stages_completed(self):
        self.assertEqual(self.result.exit_code, 0)
        manifest = self.result.manifest
        self.assertEqual([s["name"] for s in manifest["stages"]], list(STAGES))
        self.assertEqual(manifest["completed"], 7)
        self.assertIsNone(manifest["failed_stage"])

    def test_artifacts_hashed(self):
        out = self.dir / "out"
        for stage in self.result.manifest["stages"]:
            self.assertTrue(stage["artifacts"], stage["name"])
            for rel, digest in stage["artifacts"].items():
                self.assertTrue((out / rel).is_file(), rel)
                self.assertEqual(len(digest), 64)
        self.assertTrue((out / "charts" / "styles.svg").is_file())
        self.assertTrue((out / "inputs" / "ground_truth.json").is_file())

    def test_manifest_on_disk(self):
        on_disk = json.loads(self.result.manifest_path.read_text())
        self.assertEqual(on_disk, self.result.manifest)
        self.assertEqual(on_disk["config_sha256"], self.config.fingerprint())

    def test_rerun_reproduces_manifest(self):
        first = self.result.manifest_path.read_bytes()
        again = run_pipeline(self.config)
        self.assertEqual(again.manifest_path.read_bytes(), first)


class TestPipelineFailures(unittest.TestCase):
    """Test failure reporting."""

    def test_stage_failure_stops_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = small_run(Path(tmp), topics={"min_doc_len": 1000})
            result = run_pipeline(config)
        self.assertEqual(result.exit_code, 1)
        statuses = {s["name"]: s["status"] for s in result.manifest["stages"]}
        self.assertEqual(statuses["cluster"], "completed")
        self.assertEqual(statuses["topics"], "failed")
        self.assertEqual(statuses["timestamp"], "skipped")
        self.assertEqual(result.manifest["failed_stage"], "topics")
        self.assertTrue(result.manifest["stages"][1]["error"].startswith("StageError (topics): EmptyCorpusError"))

    def test_missing_input_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            missing = str(Path(tmp) / "instances.jsonl")
            config = load_config(overrides={"paths": {
                "instances": missing, "documents": missing, "output": str(Path(tmp) / "out")}}, environ={})
            with self.assertRaises(InputError) as ctx:
                run_pipeline(config)
        self.assertIn(missing, str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
