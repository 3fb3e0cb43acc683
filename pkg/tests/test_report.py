import xml.etree.ElementTree as ET

import pandas as pd
import pytest
from PIL import Image

from src.report.preview import build_preview, save_preview
from src.report.report_utils import collect_metrics, summarize, variant_of, write_report
from src.runtime.metrics import MetricsTable
from src.utils.errors import ReportError


def _metrics(path, rates_by_step, seed=0):
    table = MetricsTable()
    for step, rates in rates_by_step.items():
        for task_id, rate in enumerate(rates):
            table.add(step, task_id, 0.1, rate, seed)
    return table.write_csv(path)


@pytest.fixture
def metrics_tree(tmp_path):
    root = tmp_path / "ablate"
    _metrics(root / "head-mlp" / "seed-0" / "metrics.csv", {50: [0.0, 0.5], 100: [0.5, 1.0]}, seed=0)
    _metrics(root / "head-mlp" / "seed-1" / "metrics.csv", {50: [0.0, 0.0], 100: [0.25, 0.25]}, seed=1)
    _metrics(root / "head-gmm" / "seed-0" / "metrics.csv", {100: [1.0, 0.0]}, seed=0)
    return root


def test_variant_names(metrics_tree):
    assert variant_of(metrics_tree / "head-mlp" / "seed-1" / "metrics.csv", metrics_tree) == "head-mlp"
    assert variant_of(metrics_tree / "metrics.csv", metrics_tree) == "ablate"


def test_summary_means_and_population_std(metrics_tree):
    summary = summarize(collect_metrics(metrics_tree)).set_index("variant")
    assert summary.loc["head-mlp", "seeds"] == 2
    assert summary.loc["head-mlp", "final_step"] == 100
    assert summary.loc["head-mlp", "mean_success"] == pytest.approx(0.5)
    assert summary.loc["head-mlp", "std_success"] == pytest.approx(0.25)
    assert summary.loc["head-gmm", "mean_success"] == pytest.approx(0.5)
    assert summary.loc["head-gmm", "std_success"] == 0.0


def test_write_report_outputs(metrics_tree, tmp_path):
    out = tmp_path / "report"
    summary_path, svg_path = write_report(metrics_tree, out)
    frame = pd.read_csv(summary_path)
    assert list(frame.columns) == ["variant", "seeds", "final_step", "mean_success", "std_success"]
    assert sorted(frame["variant"]) == ["head-gmm", "head-mlp"]
    root = ET.parse(svg_path).getroot()
    assert root.tag.endswith("svg")


def test_report_errors(tmp_path):
    with pytest.raises(ReportError, match="No metrics.csv"):
        collect_metrics(tmp_path)
    run = tmp_path / "run"
    run.mkdir()
    (run / "metrics.csv").write_text("step,task_id,loss,success_rate,seed\n10,0,0.1,0.5\n")
    with pytest.raises(ReportError, match="metrics.csv:2"):
        write_report(tmp_path)
    (run / "metrics.csv").write_text("step,task_id,loss,success_rate,seed\n")
    with pytest.raises(ReportError, match="no metric rows"):
        collect_metrics(tmp_path)


def test_preview_sheet(tmp_path, tiny_suite, tiny_demos):
    sheet = build_preview(tiny_suite, tiny_demos)
    assert sheet.size == (360, 8 + 2 * (16 * 6 + 28 + 8))
    path = save_preview(tiny_suite, tiny_demos, tmp_path / "nested" / "preview.png")
    with Image.open(path) as image:
        assert image.size == sheet.size
