"""Depth-map quality metrics in physical units (cm).

All reductions are plain numpy sums over float64, so results are identical
across runs and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_BINS = 18          # one-cm bins covering ground truth in [0, 18)
THRESHOLD_RATIO = 1.25


def _check_pair(truth: np.ndarray, pred: np.ndarray):
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape:
        raise ValueError("truth and prediction must share a shape")
    if truth.size == 0:
        raise ValueError("empty depth maps")
    if np.any(~np.isfinite(truth)) or np.any(~np.isfinite(pred)):
        raise ValueError("depth maps must be finite")
    return truth, pred


def rmse(truth: np.ndarray, pred: np.ndarray) -> float:
    """Root mean squared error in cm."""
    truth, pred = _check_pair(truth, pred)
    diff = pred - truth
    return float(np.sqrt(np.mean(diff * diff)))


def threshold_accuracy(truth: np.ndarray, pred: np.ndarray,
                       ratio: float = THRESHOLD_RATIO) -> tuple[float, int]:
    """Percentage of pixels with max(y/yhat, yhat/y) strictly below `ratio`.

    Ground truth must be positive. Non-positive predictions cannot satisfy
    the ratio and are counted as failures; their count is returned so
    callers can flag degenerate predictors.
    """
    truth, pred = _check_pair(truth, pred)
    if np.any(truth <= 0.0):
        raise ValueError("ground truth depth must be positive")
    valid = pred > 0.0
    r = np.full(truth.shape, np.inf)
    r[valid] = np.maximum(truth[valid] / pred[valid], pred[valid] / truth[valid])
    good = np.count_nonzero(r < ratio)
    return 100.0 * good / truth.size, int(np.count_nonzero(~valid))


def binned_rmse(truth: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """RMSE per one-cm ground-truth bin over [0, 18).

    Returns (values, defined): empty bins report 0.0 with defined False so
    downstream code can tell "perfect" from "unsampled". Pixels at 18 cm or
    beyond fall outside every bin.
    """
    truth, pred = _check_pair(truth, pred)
    sq = (pred - truth) ** 2
    values = np.zeros(N_BINS)
    defined = np.zeros(N_BINS, dtype=bool)
    idx = np.floor(truth).astype(np.int64)
    in_range = (idx >= 0) & (idx < N_BINS)
    for b in range(N_BINS):
        sel = in_range & (idx == b)
        n = np.count_nonzero(sel)
        if n:
            values[b] = np.sqrt(sq[sel].sum() / n)
            defined[b] = True
    return values, defined


@dataclass(frozen=True)
class MetricReport:
    """Summary of one truth/prediction comparison."""

    rmse: float
    threshold_accuracy: float     # percent
    binned_rmse: np.ndarray       # (18,)
    bin_defined: np.ndarray       # (18,) bool
    invalid_predictions: int      # non-positive predicted pixels

    def to_dict(self) -> dict:
        return {
            "rmse_cm": self.rmse,
            "threshold_accuracy_pct": self.threshold_accuracy,
            "binned_rmse_cm": [v if d else None
                               for v, d in zip(self.binned_rmse, self.bin_defined)],
            "invalid_predictions": self.invalid_predictions,
        }


def evaluate_depth(truth: np.ndarray, pred: np.ndarray) -> MetricReport:
    """All metrics for one depth-map pair."""
    acc, invalid = threshold_accuracy(truth, pred)
    values, defined = binned_rmse(truth, pred)
    return MetricReport(rmse=rmse(truth, pred), threshold_accuracy=acc,
                        binned_rmse=values, bin_defined=defined,
                        invalid_predictions=invalid)
