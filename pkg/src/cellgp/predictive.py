from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictiveDistribution:
    """Gaussian posterior over capacities of one cell at the query cycles."""

    cell: str
    cycles: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.covariance).copy()

    @property
    def stddev(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def interval(self, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        sd = self.stddev
        return self.mean - z * sd, self.mean + z * sd


def posterior_covariance(prior: np.ndarray, v: np.ndarray, label: str = "") -> np.ndarray:
    """``prior - v.T @ v``, symmetrized, with negative diagonal entries clamped to zero."""
    cov = prior - v.T @ v
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov)
    neg = d < 0.0
    if np.any(neg):
        log.info("clamped %d negative posterior variances%s (min %.3e)", int(neg.sum()),
                 f" for {label}" if label else "", float(d.min()))
        idx = np.flatnonzero(neg)
        cov[idx, idx] = 0.0
    return cov
