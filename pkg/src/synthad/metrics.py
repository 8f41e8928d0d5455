"""Detection metrics: AUPR, AUROC, FPR-budget threshold calibration, accuracy.

Score orientation follows the classifier output: higher = more normal, so the
anomaly class (label -1) is the positive class and lower scores rank first.
Ties are processed as blocks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "EvalReport",
    "aupr",
    "auroc",
    "calibrate_threshold",
    "accuracy",
    "evaluate_scores",
    "aggregate_runs",
    "pr_curve",
    "roc_curve",
]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    aupr: float
    auroc: float
    threshold: float
    fpr_at_threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check_two_classes(labels: np.ndarray):
    if not np.any(labels == -1) or not np.any(labels == 1):
        raise ValueError("both classes must be present")


def _blocks(scores: np.ndarray, labels: np.ndarray):
    """Ascending unique score blocks, yielding (n_anom, n_norm) per block."""
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    l_sorted = labels[order]
    uniq, starts = np.unique(s_sorted, return_index=True)
    bounds = list(starts) + [len(scores)]
    for b, e in zip(bounds[:-1], bounds[1:]):
        lab = l_sorted[b:e]
        yield float(s_sorted[b]), int(np.sum(lab == -1)), int(np.sum(lab == 1))


def pr_curve(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, recall, precision) sweeping ascending score blocks, where a
    point is flagged anomalous when its score <= threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_two_classes(labels)
    n_anom = int(np.sum(labels == -1))
    tp = fp = 0
    out = []
    for thresh, a, n in _blocks(scores, labels):
        tp += a
        fp += n
        out.append((thresh, tp / n_anom, tp / (tp + fp)))
    return out


def aupr(scores, labels) -> float:
    """Average precision over the ascending-score sweep; ties as blocks."""
    curve = pr_curve(scores, labels)
    total = 0.0
    prev_r = 0.0
    for _, r, p in curve:
        total += (r - prev_r) * p
        prev_r = r
    return total


def auroc(scores, labels) -> float:
    """Mann-Whitney form: P(anomaly score < normal score) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_two_classes(labels)
    anom = np.sort(scores[labels == -1])
    norm = scores[labels == 1]
    # for each normal score: #anomalies strictly below + half the ties
    below = np.searchsorted(anom, norm, side="left")
    upto = np.searchsorted(anom, norm, side="right")
    u = below + 0.5 * (upto - below)
    return float(u.sum() / (len(anom) * len(norm)))


def roc_curve(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) with anomaly positive, flagged when score <= t."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_two_classes(labels)
    n_anom = int(np.sum(labels == -1))
    n_norm = int(np.sum(labels == 1))
    tp = fp = 0
    out = [(-np.inf, 0.0, 0.0)]
    for thresh, a, n in _blocks(scores, labels):
        tp += a
        fp += n
        out.append((thresh, fp / n_norm, tp / n_anom))
    return out


def calibrate_threshold(validation_normal_scores, beta: float) -> float:
    """Largest score kappa with #{score < kappa}/m <= beta.

    With the rule "anomaly iff score < kappa", the validation false-positive
    rate is <= beta by construction.
    """
    scores = np.asarray(validation_normal_scores, dtype=float)
    if scores.size == 0:
        raise ValueError("need at least one validation score")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    uniq = np.unique(scores)  # ascending
    m = scores.size
    kappa = uniq[0]
    for v in uniq:
        if np.sum(scores < v) / m <= beta:
            kappa = v
        else:
            break
    return float(kappa)


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ValueError("empty inputs")
    if predictions.shape != labels.shape:
        raise ValueError("length mismatch")
    return float(np.mean(predictions == labels))


def evaluate_scores(scores, labels, kappa: float = 0.0) -> EvalReport:
    """Full report at threshold kappa: anomaly iff score < kappa.

    kappa = 0 is the uncalibrated rule (sign(0) = +1 counts as normal).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_two_classes(labels)
    pred = np.where(scores < kappa, -1, 1)
    tp = int(np.sum((pred == -1) & (labels == -1)))
    fp = int(np.sum((pred == -1) & (labels == 1)))
    tn = int(np.sum((pred == 1) & (labels == 1)))
    fn = int(np.sum((pred == 1) & (labels == -1)))
    return EvalReport(
        accuracy=accuracy(pred, labels),
        aupr=aupr(scores, labels),
        auroc=auroc(scores, labels),
        threshold=float(kappa),
        fpr_at_threshold=fp / (fp + tn) if fp + tn else 0.0,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def aggregate_runs(reports: list[EvalReport]) -> dict:
    """Per-metric mean and sample standard deviation (0 for a single run)."""
    if not reports:
        raise ValueError("need at least one report")
    metrics = ("accuracy", "aupr", "auroc", "threshold", "fpr_at_threshold")
    out = {}
    for m in metrics:
        vals = np.array([getattr(r, m) for r in reports], dtype=float)
        out[m] = {
            "mean": float(vals.mean()),
            "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
        }
    return out


def curve_to_csv(curve, path, header):
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(curve)
