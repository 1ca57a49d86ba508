import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 1000


class StatisticsError(ValueError):
    """Raised when a statistic is undefined for the given samples."""


@dataclass
class BootstrapCI:
    """Percentile bootstrap confidence interval.

    Attributes:
        point (float): Metric on the original sample
        lo (float): Lower percentile (2.5 for a 95% interval)
        hi (float): Upper percentile (97.5 for a 95% interval)
        n_resamples (int): Resamples drawn
        seed (int): Seed of the resampling generator
        skipped (int): Resamples on which the metric was undefined
    """
    point: float
    lo: float
    hi: float
    n_resamples: int = DEFAULT_RESAMPLES
    seed: int = 0
    skipped: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> dict[str, Any]:
        return {
            "point": self.point,
            "lo": self.lo,
            "hi": self.hi,
            "n_resamples": self.n_resamples,
            "seed": self.seed,
            "skipped": self.skipped,
        }


def _defined(value: float | None) -> bool:
    return value is not None and not math.isnan(value)


def bootstrap_ci(
    metric: Callable[[NDArray[np.int64]], float | None],
    n_samples: int,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    confidence: float = 0.95,
) -> BootstrapCI:
    """Resample sample indices with replacement and take percentile bounds of `metric`.

    Args:
        metric: Evaluated on an index array into the original samples; returns
                None or NaN where it is undefined (such resamples are skipped)
        n_samples: Number of original samples
        n_resamples: Bootstrap resamples
        seed: Seed of the resampling generator
        confidence: Coverage of the interval

    Raises:
        StatisticsError: Fewer than two samples, or the metric undefined everywhere
    """
    if n_samples < 2:
        raise StatisticsError(f"Bootstrap needs at least 2 samples, got {n_samples}")
    point = metric(np.arange(n_samples))
    if not _defined(point):
        raise StatisticsError("Metric is undefined on the original sample")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_resamples):
        value = metric(rng.integers(0, n_samples, size=n_samples))
        if _defined(value):
            values.append(float(value))
    skipped = n_resamples - len(values)
    if not values:
        raise StatisticsError(f"Metric undefined on all {n_resamples} resamples")
    if skipped:
        logger.warning("Skipped %d of %d bootstrap resamples with an undefined metric", skipped, n_resamples)
    tail = 100.0 * (1.0 - confidence) / 2.0
    lo, hi = np.percentile(values, [tail, 100.0 - tail])
    return BootstrapCI(
        point=float(point), lo=float(lo), hi=float(hi), n_resamples=n_resamples, seed=seed, skipped=skipped
    )


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """(mean a − mean b) / pooled standard deviation.

    Raises:
        StatisticsError: If a sample is empty or the pooled deviation is zero
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise StatisticsError("Cohen's d needs two non-empty samples")
    dof = a.size + b.size - 2
    pooled_var = 0.0
    if dof > 0:
        pooled_var = ((a.size - 1) * a.var(ddof=1 if a.size > 1 else 0)
                      + (b.size - 1) * b.var(ddof=1 if b.size > 1 else 0)) / dof
    if pooled_var <= 0:
        raise StatisticsError("Cohen's d is undefined: pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / math.sqrt(pooled_var))
