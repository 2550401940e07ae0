"""
report.py
---------
Run artifacts: run JSON, per-epoch loss CSV, metric tables (per run,
ablation summary, sweep long-form), channel similarity matrices, a
Parameter/Value summary CSV and an optional PDF report. Strings are
sanitized before they reach FPDF so non-latin-1 characters never raise
UnicodeEncodeError.
"""

import json
import re
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd
from fpdf import FPDF

from .constants import LOSS_COLUMNS, METRIC_COLUMNS, METRIC_LABELS
from .errors import DatasetError
from .helpers import mean_std
from .losses import LossBreakdown
from .metrics import MetricsReport
from .trainer import RunRecord

FLOAT_FORMAT = "%.17g"


# ---------------------------------------------------------
# RUN JSON
# ---------------------------------------------------------

def write_run_json(record: RunRecord, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(record.to_dict(), indent=2))
    return path


def read_run_json(path) -> RunRecord:
    path = Path(path)
    try:
        return RunRecord.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid run JSON ({exc})") from exc


# ---------------------------------------------------------
# LOSS CURVES
# ---------------------------------------------------------

def loss_frame(losses: Sequence[LossBreakdown]) -> pd.DataFrame:
    frame = pd.DataFrame([b.as_dict() for b in losses], columns=LOSS_COLUMNS)
    frame.insert(0, "epoch", np.arange(1, len(losses) + 1))
    return frame


def write_loss_csv(losses: Sequence[LossBreakdown], path) -> Path:
    loss_frame(losses).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def read_loss_csv(path) -> List[LossBreakdown]:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in LOSS_COLUMNS if c not in frame.columns]
    if missing:
        raise DatasetError(f"{path}: missing loss columns {missing}")
    return [LossBreakdown(**{c: float(row[c]) for c in LOSS_COLUMNS}) for _, row in frame.iterrows()]


# ---------------------------------------------------------
# METRIC TABLES
# ---------------------------------------------------------

def metrics_frame(rows: Iterable[Tuple[Mapping, MetricsReport]]) -> pd.DataFrame:
    """One row per report; leading columns come from each row's key mapping."""
    records = []
    for keys, report in rows:
        records.append({**keys, **dict(zip(METRIC_LABELS, report.values()))})
    return pd.DataFrame(records)


def write_metrics_csv(rows: Iterable[Tuple[Mapping, MetricsReport]], path) -> Path:
    metrics_frame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def read_metrics_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [c for c in METRIC_LABELS if c not in frame.columns]
    if missing:
        raise DatasetError(f"{path}: missing metric columns {missing}")
    return frame


def ablation_summary(results: Sequence[Tuple[str, int, MetricsReport]]) -> pd.DataFrame:
    """Mean and std per metric per variant, variants in first-seen order."""
    order: List[str] = []
    grouped: Dict[str, List[MetricsReport]] = {}
    for variant, _seed, report in results:
        if variant not in grouped:
            order.append(variant)
            grouped[variant] = []
        grouped[variant].append(report)

    rows = []
    for variant in order:
        reports = grouped[variant]
        row = {"variant": variant, "runs": len(reports)}
        for key, label in zip(METRIC_COLUMNS, METRIC_LABELS):
            mean, std = mean_std([getattr(r, key) for r in reports])
            row[f"{label}_mean"] = mean
            row[f"{label}_std"] = std
        rows.append(row)
    return pd.DataFrame(rows)


def sweep_frame(results: Sequence[Tuple[Mapping[str, float], int, MetricsReport]]) -> pd.DataFrame:
    """Long form: parameter values, seed, then the six metrics."""
    return metrics_frame(({**params, "seed": seed}, report) for params, seed, report in results)


# ---------------------------------------------------------
# CHANNEL SIMILARITY
# ---------------------------------------------------------

def write_similarity_csv(matrix: np.ndarray, names: Sequence[str], path) -> Path:
    pd.DataFrame(matrix, index=names, columns=names).to_csv(path, float_format=FLOAT_FORMAT)
    return Path(path)


def write_similarity_history(record: RunRecord, row: int, directory) -> List[Path]:
    """One ``similarity_row_{row}_epoch_{epoch}.csv`` per recorded epoch."""
    directory = Path(directory)
    return [write_similarity_csv(matrix, record.similarity_names, directory / f"similarity_row_{row}_epoch_{epoch}.csv")
            for epoch, matrix in record.similarities]


# ---------------------------------------------------------
# SUMMARY CSV / PDF
# ---------------------------------------------------------

def run_summary(record: RunRecord) -> Dict:
    summary = {"seed": record.seed, "epochs_run": len(record.epoch_losses),
               "wall_clock_s": round(record.wall_clock_s, 3)}
    summary.update({f"config.{k}": v for k, v in record.config.items()})
    if record.epoch_losses:
        summary.update({f"final.{k}": v for k, v in record.epoch_losses[-1].as_dict().items()})
    report = record.final_report
    if report is not None:
        summary.update(dict(zip(METRIC_LABELS, report.values())))
    if record.checkpoint_path:
        summary["checkpoint"] = record.checkpoint_path
    summary["warnings"] = list(record.warnings)
    return summary


def export_csv(summary: Dict, filename="mtd_run_summary.csv") -> Path:
    rows = [[k, v] for k, v in summary.items() if k != "warnings"]
    rows += [["", ""], ["Warnings", ""]]
    rows += [["", w] for w in summary.get("warnings") or []]
    pd.DataFrame(rows, columns=["Parameter", "Value"]).to_csv(filename, index=False)
    return Path(filename)


def _sanitize_for_pdf(s) -> str:
    """Map common typographic characters to ASCII, then replace anything outside latin-1 with '?'."""
    if s is None:
        return ""
    if not isinstance(s, str):
        s = str(s)
    replacements = {
        "–": "-", "—": "-",
        "‘": "'", "’": "'",
        "“": '"', "”": '"',
        "α": "alpha", "β": "beta", "γ": "gamma", "σ": "sigma", "η": "eta",
        "±": "+/-",
    }
    for k, v in replacements.items():
        s = s.replace(k, v)
    s = s.encode("latin-1", "replace").decode("latin-1")
    return re.sub(r"\s+\n", "\n", s)


class PDFReport(FPDF):
    def header(self):
        self.set_font("Arial", "B", 14)
        self.cell(0, 10, "MTD Training Report", ln=True, align="C")
        self.ln(5)

    def footer(self):
        self.set_y(-15)
        self.set_font("Arial", "I", 8)
        self.cell(0, 10, "Generated by mtd", align="C")


def export_pdf(record: RunRecord, filename="mtd_run_report.pdf") -> Path:
    summary = run_summary(record)
    pdf = PDFReport()
    pdf.add_page()
    pdf.set_auto_page_break(auto=True, margin=15)

    pdf.set_font("Arial", "B", 12)
    pdf.cell(0, 10, "Run Summary", ln=True)
    pdf.set_font("Arial", size=10)
    for key, value in summary.items():
        if key == "warnings":
            continue
        pdf.multi_cell(0, 6, _sanitize_for_pdf(f"{key}: {value}"))

    pdf.ln(4)
    pdf.set_font("Arial", "B", 12)
    pdf.cell(0, 8, "Warnings:", ln=True)
    pdf.set_font("Arial", size=10)
    if summary["warnings"]:
        for w in summary["warnings"]:
            pdf.multi_cell(0, 6, _sanitize_for_pdf(f"- {w}"))
    else:
        pdf.multi_cell(0, 6, "No warnings.")

    if record.epoch_losses:
        pdf.add_page()
        pdf.set_font("Arial", "B", 12)
        pdf.cell(0, 8, "Epoch losses (every 10th and last)", ln=True)
        pdf.set_font("Arial", size=9)
        last = len(record.epoch_losses)
        for epoch, b in enumerate(record.epoch_losses, start=1):
            if epoch % 10 and epoch != 1 and epoch != last:
                continue
            line = "  ".join(f"{k}={v:.5f}" for k, v in b.as_dict().items())
            pdf.multi_cell(0, 5, _sanitize_for_pdf(f"epoch {epoch}: {line}"))

    pdf.output(str(filename))
    return Path(filename)
