"""One-vs-all per-class, per-horizon grid-cell metrics.

Counts are micro-averaged: accumulate over samples, then take ratios.
Undefined ratios (empty denominator) are NaN and written as empty CSV fields.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from fishingnet.grid import CLASS_NAMES, HORIZONS_S, NUM_CLASSES

METRICS = ("precision", "recall", "iou", "accuracy")


@dataclass
class ConfusionCounts:
    """tp/fp/fn/tn arrays of shape (horizons, classes)."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @classmethod
    def zeros(cls, horizons: int = len(HORIZONS_S)) -> "ConfusionCounts":
        z = np.zeros((horizons, NUM_CLASSES), dtype=np.int64)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> np.ndarray:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred_labels: np.ndarray, true_labels: np.ndarray) -> ConfusionCounts:
    """Counts from label grids shaped (T, rows, cols) or (N, T, rows, cols)."""
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError(f"label shape mismatch {pred.shape} vs {true.shape}")
    if pred.ndim == 3:
        pred, true = pred[None], true[None]
    if pred.ndim != 4:
        raise ValueError("expected (T, rows, cols) or (N, T, rows, cols) label grids")
    horizons = pred.shape[1]
    counts = ConfusionCounts.zeros(horizons)
    for t in range(horizons):
        cm = np.bincount((true[:, t] * NUM_CLASSES + pred[:, t]).ravel(),
                         minlength=NUM_CLASSES * NUM_CLASSES).reshape(NUM_CLASSES, NUM_CLASSES)
        diag = np.diag(cm)
        n = cm.sum()
        counts.tp[t] = diag
        counts.fp[t] = cm.sum(axis=0) - diag
        counts.fn[t] = cm.sum(axis=1) - diag
        counts.tn[t] = n - counts.tp[t] - counts.fp[t] - counts.fn[t]
    return counts


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = num.astype(np.float64)
    den = den.astype(np.float64)
    out = np.full(num.shape, np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return out


def precision(c: ConfusionCounts) -> np.ndarray:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> np.ndarray:
    return _ratio(c.tp, c.tp + c.fn)


def iou(c: ConfusionCounts) -> np.ndarray:
    return _ratio(c.tp, c.tp + c.fp + c.fn)


def accuracy(c: ConfusionCounts) -> np.ndarray:
    return _ratio(c.tp + c.tn, c.total)


METRIC_FUNCS = {"precision": precision, "recall": recall, "iou": iou, "accuracy": accuracy}


def all_metrics(c: ConfusionCounts) -> dict[str, np.ndarray]:
    return {name: fn(c) for name, fn in METRIC_FUNCS.items()}


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else f"{v:.6f}"


def horizon_table(counts: Mapping[str, ConfusionCounts], horizons=HORIZONS_S) -> list[dict]:
    """Long-format rows: predictor, class, metric, horizon_s, value."""
    rows = []
    for predictor, c in counts.items():
        metrics = all_metrics(c)
        for ci, cname in enumerate(CLASS_NAMES):
            for metric in METRICS:
                for t, h in enumerate(horizons[: c.tp.shape[0]]):
                    rows.append({"predictor": predictor, "class": cname, "metric": metric,
                                 "horizon_s": h, "value": float(metrics[metric][t, ci])})
    return rows


def write_horizon_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["predictor", "class", "metric", "horizon_s", "value"])
    for r in rows:
        w.writerow([r["predictor"], r["class"], r["metric"], f"{r['horizon_s']:.1f}", _fmt(r["value"])])
    path.write_text(buf.getvalue())
    return path


def read_horizon_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            rows.append({"predictor": r["predictor"], "class": r["class"], "metric": r["metric"],
                         "horizon_s": float(r["horizon_s"]),
                         "value": float(r["value"]) if r["value"] else float("nan")})
    return rows


def summary_table(counts: Mapping[str, ConfusionCounts], horizon_index: int = 0) -> tuple[list[str], list[list[str]]]:
    """Class x metric rows with one column per predictor at one horizon."""
    header = ["class", "metric", *counts.keys()]
    metrics = {p: all_metrics(c) for p, c in counts.items()}
    body = []
    for ci, cname in enumerate(CLASS_NAMES):
        for metric in METRICS:
            body.append([cname, metric, *(_fmt(metrics[p][metric][horizon_index, ci]) for p in counts)])
    return header, body


def write_summary_csv(counts: Mapping[str, ConfusionCounts], path: str | Path, horizon_index: int = 0) -> Path:
    header, body = summary_table(counts, horizon_index)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def horizon_curves(counts: Mapping[str, ConfusionCounts], out_dir: str | Path,
                   plots: bool = True) -> tuple[list[dict], list[Path]]:
    """Write ``horizon_metrics.csv`` and one plot per metric into ``out_dir``."""
    from fishingnet.plotting import plot_horizon_curves

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = horizon_table(counts)
    paths = [write_horizon_csv(rows, out_dir / "horizon_metrics.csv")]
    if plots:
        paths += plot_horizon_curves(rows, out_dir)
    return rows, paths
