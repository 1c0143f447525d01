"""Error metrics against held-out evaluations and Monte-Carlo references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import ParameterSpace
from .qmc import mc_points


class MetricError(ValueError):
    pass


def rmse(pred, truth):
    """Root mean squared error over all entries of equally shaped arrays."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise MetricError("empty arrays")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def relative_mse(pred, truth):
    """Mean squared error normalized by the (population) variance of truth.

    Scale-free: both arguments rescaled by the same factor leave the
    value unchanged.  Returns NaN for zero-variance truth.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch {pred.shape} vs {truth.shape}")
    var = float(np.var(truth))
    if var == 0.0:
        return float("nan")
    return float(np.mean((pred - truth) ** 2) / var)


def l2_field_error(field_a, field_b, cell_weights=None):
    """Weighted l2 distance between two fields; uniform 1/P by default."""
    a = np.asarray(field_a, dtype=float).ravel()
    b = np.asarray(field_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise MetricError(f"length mismatch {a.size} vs {b.size}")
    if cell_weights is None:
        w = np.full(a.size, 1.0 / a.size)
    else:
        w = np.asarray(cell_weights, dtype=float).ravel()
        if w.shape != a.shape:
            raise MetricError("weights must match field length")
    return float(np.sqrt(np.sum(w * (a - b) ** 2)))


@dataclass(frozen=True)
class ReferenceStats:
    """Per-cell mean and standard deviation from a Monte-Carlo sweep."""

    mean: np.ndarray
    sd: np.ndarray  # population convention
    n: int
    seed: int

    def __post_init__(self):
        if np.any(self.sd < 0) or not np.all(np.isfinite(self.mean)):
            raise MetricError("reference statistics must be finite, sd >= 0")


def mc_reference(evaluator, space: ParameterSpace, n=50_000, seed=0,
                 chunk=4096) -> ReferenceStats:
    """Streaming mean and standard deviation of an evaluator over MC points.

    One-pass Welford update per chunk keeps memory at one block of
    evaluations; deterministic for a fixed seed.
    """
    n = int(n)
    points = space.quantile(mc_points(space.M, n, seed))
    count = 0
    mean = None
    m2 = None
    for start in range(0, n, chunk):
        block = np.asarray(evaluator(points[start:start + chunk]), dtype=float)
        block = block.reshape(block.shape[0], -1)
        bn = block.shape[0]
        bmean = block.mean(axis=0)
        bm2 = ((block - bmean) ** 2).sum(axis=0)
        if mean is None:
            count, mean, m2 = bn, bmean, bm2
        else:
            delta = bmean - mean
            total = count + bn
            mean = mean + delta * (bn / total)
            m2 = m2 + bm2 + delta ** 2 * (count * bn / total)
            count = total
    sd = np.sqrt(m2 / count)
    return ReferenceStats(mean=mean, sd=sd, n=count, seed=int(seed))
