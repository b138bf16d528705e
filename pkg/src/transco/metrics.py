"""Evaluation metrics for coefficient recovery, detection and prediction."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError, UndefinedMetricError


@dataclass(frozen=True)
class DetectionScore:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse_beta(beta_hat, beta_true):
    beta_hat, beta_true = _pair(beta_hat, beta_true)
    return float(np.mean((beta_hat - beta_true) ** 2))


def f1_detection(detected, truth):
    """Precision/recall/F1 of a detected index set against the planted one.

    Both sets empty counts as a perfect score.
    """
    det = {int(i) for i in np.asarray(detected).ravel()}
    tru = {int(i) for i in np.asarray(truth).ravel()}
    tp = len(det & tru)
    fp = len(det - tru)
    fn = len(tru - det)
    if not det and not tru:
        return DetectionScore(1.0, 1.0, 1.0, 0, 0, 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if tp else 0.0
    return DetectionScore(precision, recall, f1, tp, fp, fn)


def huber_loss(y, y_hat, alpha=0.05):
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be > 0, got {alpha}")
    y, y_hat = _pair(y, y_hat)
    e = np.abs(y - y_hat)
    return float(np.mean(np.where(e <= alpha, 0.5 * e * e, alpha * e - 0.5 * alpha * alpha)))


def r_squared(y, y_hat):
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise UndefinedMetricError("R-squared needs at least two observations")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise UndefinedMetricError("R-squared is undefined for a constant response")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / sst
