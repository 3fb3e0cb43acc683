"""Report emission: per-variant summary CSV and an SVG learning-curve figure"""

import io
from pathlib import Path

import matplotlib
matplotlib.use("Agg")  # Headless backend, files only
import matplotlib.pyplot as plt
import pandas as pd

from ..cleanup.cleanup_utils import atomic_write_bytes
from ..config.config import METRICS_FILENAME
from ..runtime.metrics import MetricsTable
from ..utils.errors import ReportError
from ..utils.log_utils import log_info, log_success

SUMMARY_FILENAME = "summary.csv"
CURVES_FILENAME = "learning_curves.svg"
SUMMARY_COLUMNS = ["variant", "seeds", "final_step", "mean_success", "std_success"]


def variant_of(metrics_path, root):
    """Variant name of a metrics file: its run directory, skipping a trailing seed-<n> level."""
    run_dir = metrics_path.parent
    if run_dir.name.startswith("seed-"):
        run_dir = run_dir.parent
    if run_dir == root:
        return root.name or "run"
    return run_dir.relative_to(root).as_posix()


def collect_metrics(metrics_dir):
    """Long-form frame of every metrics row under a directory.

    Columns: variant, run, step, task_id, loss, success_rate, seed.
    """
    root = Path(metrics_dir)
    files = sorted(root.rglob(METRICS_FILENAME))
    if not files:
        raise ReportError(f"No {METRICS_FILENAME} found under {root}")
    frames = []
    for run, path in enumerate(files):
        table = MetricsTable.from_csv(path)
        if not table.rows:
            raise ReportError(f"{path}: no metric rows")
        frame = pd.DataFrame([r.__dict__ for r in table.rows])
        frame["variant"] = variant_of(path, root)
        frame["run"] = run
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def summarize(frame):
    """Mean and population std over runs of the final-step mean success, per variant."""
    per_step = frame.groupby(["variant", "run", "step"], as_index=False)["success_rate"].mean()
    final = per_step.loc[per_step.groupby(["variant", "run"])["step"].idxmax()]
    summary = final.groupby("variant").agg(
        seeds=("run", "count"),
        final_step=("step", "max"),
        mean_success=("success_rate", "mean"),
        std_success=("success_rate", lambda s: float(s.std(ddof=0))),
    ).reset_index()
    return summary[SUMMARY_COLUMNS]


def learning_curves(frame):
    """variant -> (steps, mean success over tasks and runs)."""
    per_run = frame.groupby(["variant", "run", "step"], as_index=False)["success_rate"].mean()
    curves = per_run.groupby(["variant", "step"], as_index=False)["success_rate"].mean()
    return {
        variant: (group["step"].to_numpy(), group["success_rate"].to_numpy())
        for variant, group in curves.groupby("variant")
    }


def _render_svg(curves):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for variant, (steps, success) in sorted(curves.items()):
        ax.plot(steps, success, marker="o", markersize=3, label=variant)
    ax.set_xlabel("Training step")
    ax.set_ylabel("Mean success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("Success vs. training step")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", bbox_inches="tight")
    plt.close(fig)
    return buffer.getvalue()


def write_report(metrics_dir, out_dir=None):
    """Write summary.csv and learning_curves.svg for every metrics file under metrics_dir

    Args:
        metrics_dir: Directory searched recursively for metrics.csv files
        out_dir: Destination (default: metrics_dir)

    Returns:
        tuple: (summary path, svg path)
    """
    metrics_dir = Path(metrics_dir)
    out_dir = Path(out_dir) if out_dir is not None else metrics_dir
    frame = collect_metrics(metrics_dir)
    summary = summarize(frame)
    summary_path = atomic_write_bytes(out_dir / SUMMARY_FILENAME, summary.to_csv(index=False).encode("utf-8"))

    svg_path = atomic_write_bytes(out_dir / CURVES_FILENAME, _render_svg(learning_curves(frame)))

    log_info(f"Summarised {frame['run'].nunique()} run(s) over {summary.shape[0]} variant(s)")
    log_success(f"Report written: {summary_path}, {svg_path}")
    return summary_path, svg_path
