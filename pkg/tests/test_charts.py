"""
Unit tests for SVG charts.
"""

import re
import tempfile
import unittest
import xml.etree.ElementTree as ET
from pathlib import Path

from trendcause.charts import emit_chart, emit_style_stack, emit_timeline_chart
from trendcause.exceptions import InputError
from trendcause.models import CausalTopic, IconicStyle, TimelineEntry, TrendSeries

SVG = "{http://www.w3.org/2000/svg}"


def _ids(root):
    return {el.get("id") for el in root.iter() if el.get("id")}


def _texts(root):
    return {"".join(el.itertext()).strip() for el in root.iter(f"{SVG}text")}


class TestEmitChart(unittest.TestCase):
    """Test forecast line charts."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.train = TrendSeries(id="train", values=[0.1, 0.2, 0.3, 0.25, 0.2, 0.3, 0.35, 0.4])
        self.predictions = {"truth": [0.45, 0.5], "ar": [0.41, 0.42], "cultural": [0.44, 0.49]}

    def tearDown(self):
        self.tmp.cleanup()

    def test_series_groups_and_legend(self):
        path = emit_chart([self.train], self.dir / "style.svg", self.predictions, start=8)
        root = ET.parse(path).getroot()
        series = {i for i in _ids(root) if i.startswith("series-")}
        self.assertEqual(series, {"series-train", "series-truth", "series-ar", "series-cultural"})
        self.assertTrue({"train", "truth", "ar", "cultural"} <= _texts(root))

    def test_constant_series_is_flat(self):
        path = emit_chart([TrendSeries(id="flat", values=[0.3] * 6)], self.dir / "flat.svg")
        root = ET.parse(path).getroot()
        group = next(el for el in root.iter() if el.get("id") == "series-flat")
        d = next(el for el in group.iter(f"{SVG}path")).get("d")
        numbers = [float(n) for n in re.findall(r"-?\d+(?:\.\d+)?", d)]
        ys = numbers[1::2]
        self.assertGreaterEqual(len(ys), 2)
        self.assertEqual(len(set(ys)), 1)

    def test_byte_stable(self):
        a = emit_chart([self.train], self.dir / "a.svg", self.predictions, start=8, title="style_0")
        b = emit_chart([self.train], self.dir / "b.svg", self.predictions, start=8, title="style_0")
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_date_ticks(self):
        labels = [f"{1900 + 5 * t}-01-01" for t in range(10)]
        path = emit_chart([self.train], self.dir / "ticks.svg", self.predictions, start=8, x_labels=labels)
        self.assertIn("1900-01-01", _texts(ET.parse(path).getroot()))

    def test_nothing_to_chart(self):
        with self.assertRaises(InputError):
            emit_chart([], self.dir / "empty.svg")
        with self.assertRaises(InputError):
            emit_chart([self.train], self.dir / "empty.svg", {"ar": []})


class TestStyleStack(unittest.TestCase):
    """Test the stacked popularity chart."""

    def test_top_styles_only(self):
        styles = [TrendSeries(id=f"style_{i}", values=[0.1 * i + 0.05] * 5) for i in range(4)]
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_style_stack(styles, Path(tmp) / "stack.svg", top=2)
            series = {i for i in _ids(ET.parse(path).getroot()) if i.startswith("series-")}
        self.assertEqual(series, {"series-style_3", "series-style_2"})

    def test_unequal_lengths(self):
        styles = [TrendSeries(id="a", values=[0.5, 0.5]), TrendSeries(id="b", values=[0.5])]
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InputError):
                emit_style_stack(styles, Path(tmp) / "stack.svg")


class TestTimelineChart(unittest.TestCase):
    """Test the timeline strip."""

    def test_bands_and_words(self):
        entries = [
            TimelineEntry(bin_index=0, bin_start="1900-01-01",
                          iconic_styles=[IconicStyle(style_id="military", lift=0.8)],
                          causal_topics={"military": [CausalTopic(topic_id="topic_0", top_words=["army", "war"])]}),
            TimelineEntry(bin_index=1, bin_start="1905-01-01",
                          iconic_styles=[IconicStyle(style_id="flapper", lift=0.9)]),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_timeline_chart(entries, Path(tmp) / "timeline.svg")
            root = ET.parse(path).getroot()
        self.assertTrue({"era-0", "era-1"} <= _ids(root))
        text = " ".join(_texts(root))
        self.assertIn("army war", text)
        self.assertIn("flapper", text)

    def test_empty(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InputError):
                emit_timeline_chart([], Path(tmp) / "timeline.svg")


if __name__ == "__main__":
    unittest.main()
