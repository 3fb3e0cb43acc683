"""Metrics table: (step, task_id, loss, success_rate, seed) rows and their CSV form"""

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from ..cleanup.cleanup_utils import atomic_write_bytes
from ..config.config import METRICS_HEADER
from ..utils.errors import ContractViolation, ReportError


@dataclass(frozen=True)
class MetricRow:
    step: int
    task_id: int
    loss: float
    success_rate: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ContractViolation(f"success_rate must lie in [0, 1], got {self.success_rate}")


@dataclass
class MetricsTable:
    rows: List[MetricRow] = field(default_factory=list)

    def add(self, step, task_id, loss, success_rate, seed):
        self.rows.append(MetricRow(int(step), int(task_id), float(loss), float(success_rate), int(seed)))

    def extend(self, other):
        self.rows.extend(other.rows)

    def steps(self):
        return sorted({r.step for r in self.rows})

    @property
    def final_step(self):
        return max((r.step for r in self.rows), default=0)

    def at_step(self, step):
        return [r for r in self.rows if r.step == step]

    def success_by_task(self, step=None):
        """task_id -> success rate at a step (default: the final step)."""
        step = self.final_step if step is None else step
        return {r.task_id: r.success_rate for r in self.at_step(step)}

    def mean_success(self, step=None):
        rates = list(self.success_by_task(step).values())
        return sum(rates) / len(rates) if rates else 0.0

    def family_success(self, families, step=None):
        """family -> mean success over its tasks; families maps task_id -> family."""
        grouped = {}
        for task_id, rate in self.success_by_task(step).items():
            grouped.setdefault(families[task_id], []).append(rate)
        return {family: sum(v) / len(v) for family, v in grouped.items()}

    def to_csv_text(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in sorted(self.rows, key=lambda r: (r.step, r.task_id, r.seed)):
            loss = "nan" if math.isnan(r.loss) else repr(r.loss)
            writer.writerow([r.step, r.task_id, loss, repr(r.success_rate), r.seed])
        return buffer.getvalue()

    def write_csv(self, path):
        return atomic_write_bytes(path, self.to_csv_text().encode("utf-8"))

    @classmethod
    def from_csv(cls, path):
        """Parse a metrics CSV; any malformed line raises ReportError naming file and line."""
        path = Path(path)
        if not path.exists():
            raise ReportError(f"Metrics file not found: {path}")
        table = cls()
        with open(path, "r", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != METRICS_HEADER:
                raise ReportError(f"{path}:1: expected header {','.join(METRICS_HEADER)}, got {header}")
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(METRICS_HEADER):
                    raise ReportError(f"{path}:{line_no}: expected {len(METRICS_HEADER)} fields, got {len(row)}")
                try:
                    table.add(int(row[0]), int(row[1]), float(row[2]), float(row[3]), int(row[4]))
                except (ValueError, ContractViolation) as e:
                    raise ReportError(f"{path}:{line_no}: {e}")
        return table
