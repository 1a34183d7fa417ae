"""
Batch-means error estimation and weighted trend fits
"""

from typing import Sequence, Tuple

import numpy as np


class BatchMeans:
    """
    Streaming batch-means accumulator for a fixed-length series of vectors.

    The first ``n_batches * (n_total // n_batches)`` observations are split
    into ``n_batches`` consecutive batches; the mean uses every observation.
    """

    def __init__(self, n_total: int, n_batches: int, width: int):
        if n_total < n_batches:
            raise ValueError(f"{n_total} observations cannot fill {n_batches} batches")
        self.n_total = n_total
        self.n_batches = n_batches
        self.batch_size = n_total // n_batches
        self.count = 0
        self.total = np.zeros(width)
        self.total_sq = np.zeros(width)
        self.batch_sums = np.zeros((n_batches, width))

    def add(self, value) -> None:
        value = np.asarray(value, dtype=float)
        batch = self.count // self.batch_size
        if batch < self.n_batches:
            self.batch_sums[batch] += value
        self.total += value
        self.total_sq += value * value
        self.count += 1

    @property
    def mean(self) -> np.ndarray:
        return self.total / max(self.count, 1)

    @property
    def standard_error(self) -> np.ndarray:
        batch_means = self.batch_sums / self.batch_size
        return np.sqrt(batch_means.var(axis=0, ddof=1) / self.n_batches)

    @property
    def variance(self) -> np.ndarray:
        """Plain sample variance of the observations"""
        if self.count < 2:
            return np.zeros_like(self.total)
        mean = self.mean
        return np.maximum(self.total_sq / self.count - mean * mean, 0.0) * self.count / (self.count - 1)

    def effective_sample_size(self) -> np.ndarray:
        se = self.standard_error
        with np.errstate(divide="ignore", invalid="ignore"):
            ess = np.where(se > 0, self.variance / (se * se), float(self.count))
        return np.minimum(ess, float(self.count))


def weighted_slope(x: Sequence[float], y: Sequence[float], sigma: Sequence[float],
                   sigma_floor: float = 1e-12) -> Tuple[float, float]:
    """
    Weighted least-squares slope of y against x and its standard error.

    Weights are 1/sigma**2 with sigma floored at ``sigma_floor`` so exact
    points (zero error) stay usable.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 2 or np.unique(x).shape[0] < 2:
        raise ValueError("a slope needs at least two distinct abscissae")
    sigma = np.maximum(np.asarray(sigma, dtype=float), sigma_floor)

    # absolute errors: covariance is not rescaled by the residuals
    coefficients, covariance = np.polyfit(x, y, 1, w=1.0 / sigma, cov="unscaled")
    return float(coefficients[0]), float(np.sqrt(covariance[0, 0]))
