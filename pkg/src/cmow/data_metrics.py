"""Task/corpus ingestion, score binning, and evaluation measures.

Tasks arrive as UTF-8 TSV files with a header row; a column map in the
config ties header names to the (sentence A, sentence B, label) roles so
synthetic desk-scale tasks ride the same path as GLUE-style files.
Regression-style tasks are binned into fixed-width intervals on load and
trained as plain classification; predictions are de-binned to interval
midpoints for correlation metrics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, StructuralError

log = logging.getLogger("cmow")

METRIC_NAMES = ("accuracy", "f1", "matthews", "pearson", "spearman")


@dataclass
class TaskSpec:
    name: str
    arity: str = "single"  # "single" | "pair"
    label_kind: str = "classes"  # "classes" | "binned-regression"
    n_classes: int = 2
    lo: float = 0.0
    hi: float = 5.0
    width: float = 0.2
    metrics: tuple[str, ...] = ("accuracy",)
    selection: str = "accuracy"  # a metric name, or "avg" of `metrics`

    def __post_init__(self):
        if self.arity not in ("single", "pair"):
            raise StructuralError(f"unknown arity {self.arity!r}")
        if self.label_kind == "binned-regression":
            bins = (self.hi - self.lo) / self.width
            if bins <= 0 or abs(bins - round(bins)) > 1e-9:
                raise StructuralError(
                    f"(hi - lo) / width must be a positive integer, got {bins}"
                )
            self.n_classes = int(round(bins))
        elif self.label_kind != "classes":
            raise StructuralError(f"unknown label kind {self.label_kind!r}")
        for m in self.metrics:
            if m not in METRIC_NAMES:
                raise StructuralError(f"unknown metric {m!r}")
        if self.selection != "avg" and self.selection not in self.metrics:
            raise StructuralError(f"selection metric {self.selection!r} not in metrics {self.metrics}")


@dataclass
class ExampleRow:
    id: int
    a: str
    b: str | None
    label: int  # class id (binned for regression tasks)
    score: float | None = None  # raw score, kept for correlation metrics


def bin_score(score: float, lo: float, hi: float, width: float) -> int:
    """Class id of a real score in fixed-width bins over [lo, hi]; the
    upper boundary belongs to the last bin."""
    if not lo <= score <= hi:
        raise DataError(f"score {score} outside [{lo}, {hi}]")
    n_bins = int(round((hi - lo) / width))
    if score == hi:
        return n_bins - 1
    return min(int((score - lo) / width), n_bins - 1)


def debin(class_id: int, lo: float, hi: float, width: float) -> float:
    """Midpoint of the bin; inverse of bin_score up to width/2."""
    n_bins = int(round((hi - lo) / width))
    if not 0 <= class_id < n_bins:
        raise StructuralError(f"class {class_id} out of range [0, {n_bins})")
    return lo + (class_id + 0.5) * width


def _check_pair(preds, golds) -> tuple[np.ndarray, np.ndarray]:
    preds = np.asarray(preds)
    golds = np.asarray(golds)
    if preds.shape != golds.shape or preds.ndim != 1 or preds.size == 0:
        raise StructuralError(f"preds/golds must be equal-length nonempty 1-D, got {preds.shape} vs {golds.shape}")
    return preds, golds


def metric_accuracy(preds, golds) -> float:
    preds, golds = _check_pair(preds, golds)
    return float((preds == golds).mean())


def metric_f1(preds, golds) -> float:
    """Positive-class (label 1) F1 for binary tasks."""
    preds, golds = _check_pair(preds, golds)
    tp = float(((preds == 1) & (golds == 1)).sum())
    fp = float(((preds == 1) & (golds == 0)).sum())
    fn = float(((preds == 0) & (golds == 1)).sum())
    if tp == 0.0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def metric_matthews(preds, golds) -> float:
    """Binary Matthews correlation; 0 by convention when a marginal is zero."""
    preds, golds = _check_pair(preds, golds)
    if not set(np.unique(preds)) <= {0, 1} or not set(np.unique(golds)) <= {0, 1}:
        raise StructuralError("matthews correlation is defined here for binary 0/1 labels")
    tp = float(((preds == 1) & (golds == 1)).sum())
    tn = float(((preds == 0) & (golds == 0)).sum())
    fp = float(((preds == 1) & (golds == 0)).sum())
    fn = float(((preds == 0) & (golds == 1)).sum())
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def metric_pearson(preds, golds) -> float:
    preds, golds = _check_pair(preds, golds)
    if preds.size < 2:
        raise StructuralError("correlation needs at least 2 points")
    x = preds.astype(np.float64) - preds.mean()
    y = golds.astype(np.float64) - golds.mean()
    sx = np.sqrt((x * x).sum())
    sy = np.sqrt((y * y).sum())
    if sx == 0.0 or sy == 0.0:
        raise DataError("correlation undefined for a constant vector")
    return float((x * y).sum() / (sx * sy))


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties sharing the average of their positions."""
    x = np.asarray(x)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def metric_spearman(preds, golds) -> float:
    preds, golds = _check_pair(preds, golds)
    return metric_pearson(average_ranks(preds), average_ranks(golds))


_METRIC_FNS = {
    "accuracy": metric_accuracy,
    "f1": metric_f1,
    "matthews": metric_matthews,
    "pearson": metric_pearson,
    "spearman": metric_spearman,
}


def evaluate_predictions(spec: TaskSpec, pred_classes, rows: list[ExampleRow]) -> dict[str, float]:
    """Compute the task's declared metrics for predicted class ids against
    the gold labels (or raw scores, for binned-regression tasks)."""
    pred_classes = np.asarray(pred_classes)
    gold_labels = np.array([r.label for r in rows])
    if spec.label_kind == "binned-regression":
        preds = np.array([debin(int(c), spec.lo, spec.hi, spec.width) for c in pred_classes])
        golds = np.array(
            [r.score if r.score is not None else debin(r.label, spec.lo, spec.hi, spec.width) for r in rows]
        )
    else:
        preds, golds = pred_classes, gold_labels
    return {m: _METRIC_FNS[m](preds, golds) for m in spec.metrics}


def selection_value(spec: TaskSpec, metrics: dict[str, float]) -> float:
    if spec.selection == "avg":
        return float(np.mean([metrics[m] for m in spec.metrics]))
    return metrics[spec.selection]


def read_corpus(path):
    """Yield (line_id, text) for nonempty lines; ids are original 0-based
    line numbers so they stay valid as teacher-record keys."""
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            text = line.rstrip("\n")
            if text.strip():
                yield i, text


def read_task_tsv(
    path,
    spec: TaskSpec,
    columns: dict[str, str],
    strict: bool = True,
) -> list[ExampleRow]:
    """Parse a header-rowed TSV into ExampleRows.

    `columns` maps roles to header names: {"a": ..., "label": ...} plus
    "b" for pair tasks.  Malformed lines are fatal under strict=True and
    skipped with a warning otherwise.  Regression scores are binned here.
    """
    rows: list[ExampleRow] = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        idx: dict[str, int] = {}
        for role in ("a", "b", "label"):
            if role == "b" and spec.arity == "single":
                continue
            name = columns.get(role)
            if name is None or name not in header:
                raise DataError(f"column map needs role {role!r} -> a header of {header}, got {name!r}")
            idx[role] = header.index(name)
        needed = max(idx.values()) + 1
        for line_no, line in enumerate(f, start=2):
            text = line.rstrip("\n")
            if not text.strip():
                continue
            fields = text.split("\t")
            try:
                if len(fields) < needed:
                    raise DataError(f"expected >= {needed} columns, got {len(fields)}")
                a = fields[idx["a"]]
                b = fields[idx["b"]] if "b" in idx else None
                raw = fields[idx["label"]]
                if spec.label_kind == "binned-regression":
                    score = float(raw)
                    label = bin_score(score, spec.lo, spec.hi, spec.width)
                else:
                    score = None
                    label = int(raw)
                    if not 0 <= label < spec.n_classes:
                        raise DataError(f"label {label} out of range [0, {spec.n_classes})")
                if spec.arity == "pair" and (b is None or not b.strip()):
                    raise DataError("pair task row is missing sentence B")
                if not a.strip():
                    raise DataError("empty sentence A")
            except (ValueError, DataError) as e:
                msg = f"{path}:{line_no}: {e}"
                if strict:
                    raise DataError(msg) from None
                log.warning("skipping malformed row: %s", msg)
                continue
            # id = 0-based data-row index (file line - 2), the key teacher
            # exports use for task records
            rows.append(ExampleRow(id=line_no - 2, a=a, b=b, label=label, score=score))
    return rows
