"""Classification metrics on thresholded 0/1 predictions and the fitness product."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    mae: float
    rmse: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mae": self.mae,
            "rmse": self.rmse,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def compute_metrics(labels, predicted) -> MetricsReport:
    """Confusion counts plus accuracy, MAE, RMSE and F1 (positive class 1).

    Both inputs are 0/1 label vectors, so mae equals the error rate and
    rmse equals its square root.  F1 is defined as 0 when the 2tp+fp+fn
    denominator degenerates.
    """
    y = np.asarray(labels, dtype=int)
    yhat = np.asarray(predicted, dtype=int)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size < 1:
        raise ValueError("need at least one prediction")
    if not (np.isin(y, (0, 1)).all() and np.isin(yhat, (0, 1)).all()):
        raise ValueError("labels and predictions must be 0/1")
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fp = int(np.sum((y == 0) & (yhat == 1)))
    tn = int(np.sum((y == 0) & (yhat == 0)))
    fn = int(np.sum((y == 1) & (yhat == 0)))
    err = np.abs(y - yhat)
    mae = float(np.mean(err))
    rmse = float(np.sqrt(np.mean(err.astype(float) ** 2)))
    denom = 2 * tp + fp + fn
    f1 = 2.0 * tp / denom if denom > 0 else 0.0
    return MetricsReport(
        accuracy=(tp + tn) / y.size,
        mae=mae,
        rmse=rmse,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def fitness(validation_accuracy: float, test_f1: float) -> float:
    """Selection score: validation accuracy times test F1."""
    for name, value in (("validation_accuracy", validation_accuracy), ("test_f1", test_f1)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    return validation_accuracy * test_f1
