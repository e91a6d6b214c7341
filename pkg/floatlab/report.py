"""
Experiment reports and their artifacts.

An ExperimentReport holds one row per grid point (both sides of a limit
theorem side by side) plus the extrapolated and predicted limits. Reports are
written as CSV (the source of truth), as a log-log SVG plot, and as a
msgpack dump carrying the metadata the CSV leaves out.
"""

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import msgpack

logger = logging.getLogger(__name__)

CSV_HEADER = ["param", "estimate", "stderr", "normalized", "predicted", "rel_dev", "seed"]


def relative_deviation(value: Optional[float], predicted: Optional[float]) -> float:
    if value is None or predicted is None or predicted == 0:
        return float("nan")
    return abs(value - predicted) / abs(predicted)


@dataclass
class ReportRow:
    """One grid point of an experiment."""
    param: float
    estimate: float
    stderr: float
    normalized: float
    predicted: Optional[float] = None
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def rel_dev(self) -> float:
        return relative_deviation(self.normalized, self.predicted)


@dataclass
class ExperimentReport:
    """
    Result of a convergence study.

    ``limit_param`` is the value the grid parameter tends to (0 for delta,
    inf for a sample size, 1 for a dilation factor); the extrapolated limit
    is written to the CSV as an extra row at that parameter. ``exponent`` is
    the predicted power law of ``estimate`` in ``param`` and drives the
    reference slope line of the plot.
    """
    experiment: str
    rows: List[ReportRow] = field(default_factory=list)
    limit: Optional[float] = None
    predicted: Optional[float] = None
    seed: Optional[int] = None
    param_name: str = "param"
    limit_param: float = 0.0
    exponent: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def rel_dev(self) -> float:
        """|extrapolated - predicted| / predicted."""
        return relative_deviation(self.limit, self.predicted)

    def sort(self) -> "ExperimentReport":
        self.rows.sort(key=lambda row: row.param)
        return self

    def summary(self) -> str:
        parts = [f"{self.experiment}: {len(self.rows)} grid points"]
        if self.limit is not None:
            parts.append(f"extrapolated={self.limit:.6g}")
        if self.predicted is not None:
            parts.append(f"predicted={self.predicted:.6g}")
        if self.limit is not None and self.predicted is not None:
            parts.append(f"rel_dev={self.rel_dev:.3%}")
        return ", ".join(parts)


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _parse(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def report_lines(report: ExperimentReport) -> List[List[str]]:
    """CSV records (without header): grid rows sorted by param, then the limit row."""
    seed = "" if report.seed is None else str(report.seed)
    lines = []
    for row in sorted(report.rows, key=lambda r: r.param):
        lines.append([_fmt(row.param), _fmt(row.estimate), _fmt(row.stderr), _fmt(row.normalized),
                      _fmt(row.predicted), _fmt(row.rel_dev), seed])
    if report.rows and report.limit is not None:
        lines.append([_fmt(report.limit_param), _fmt(report.limit), _fmt(float("nan")), _fmt(report.limit),
                      _fmt(report.predicted), _fmt(report.rel_dev), seed])
    return lines


def emit_csv(report: ExperimentReport, path: str) -> str:
    """
    Write the report as CSV with the fixed header.

    Floats are written with repr so re-parsing reproduces them exactly.

    Raises:
        OSError: If the path is not writable
    """
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(report_lines(report))
    logger.info("Wrote %s", path)
    return path


def read_csv(path: str) -> List[Dict[str, Optional[float]]]:
    """Parse a CSV written by emit_csv back into per-row dicts."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"Unexpected CSV header in {path}: {reader.fieldnames}")
        return [{key: _parse(value) for key, value in record.items()} for record in reader]


def build_figure(report: ExperimentReport):
    """
    Log-log figure: raw estimate with a reference slope line on the left,
    normalized quantity with the predicted asymptote on the right.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in sorted(report.rows, key=lambda r: r.param) if r.param > 0 and math.isfinite(r.param)]
    fig, (ax_raw, ax_norm) = plt.subplots(1, 2, figsize=(10, 4))
    params = [r.param for r in rows]

    positive = [(p, r.estimate) for p, r in zip(params, rows) if r.estimate > 0]
    if positive:
        ax_raw.plot([p for p, _ in positive], [e for _, e in positive], "o-", label="estimate")
        if report.exponent is not None:
            p0, e0 = positive[0]
            ref = [e0 * (p / p0) ** report.exponent for p, _ in positive]
            ax_raw.plot([p for p, _ in positive], ref, ":", color="gray",
                        label=f"slope {report.exponent:g}")
        ax_raw.set_xscale("log")
        ax_raw.set_yscale("log")
    ax_raw.set_xlabel(report.param_name)
    ax_raw.set_ylabel("estimate")
    ax_raw.legend()

    normalized = [(p, r.normalized) for p, r in zip(params, rows) if r.normalized > 0]
    if normalized:
        ax_norm.plot([p for p, _ in normalized], [v for _, v in normalized], "s-", label="normalized")
        ax_norm.set_xscale("log")
        ax_norm.set_yscale("log")
    if report.predicted is not None and report.predicted > 0:
        ax_norm.axhline(report.predicted, linestyle="--", color="black", label="predicted limit")
    if report.limit is not None and report.limit > 0:
        ax_norm.axhline(report.limit, linestyle="-.", color="tab:red", label="extrapolated")
    ax_norm.set_xlabel(report.param_name)
    ax_norm.set_ylabel("normalized")
    ax_norm.legend()
    fig.suptitle(report.summary())
    fig.tight_layout()
    return fig


def emit_svg(report: ExperimentReport, path: str) -> str:
    import matplotlib.pyplot as plt

    fig = build_figure(report)
    try:
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    logger.info("Wrote %s", path)
    return path


def dump_report(report: ExperimentReport, path: str) -> str:
    packed = msgpack.packb(asdict(report), use_bin_type=True)
    with open(path, "wb") as f:
        f.write(packed)
    return path


def load_report(path: str) -> ExperimentReport:
    with open(path, "rb") as f:
        data = msgpack.unpackb(f.read(), raw=False, strict_map_key=False)
    rows = [ReportRow(**row) for row in data.pop("rows")]
    return ExperimentReport(rows=rows, **data)
