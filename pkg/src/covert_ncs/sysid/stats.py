"""Batch statistics for repeated identification runs."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

Z_95 = 1.96


class StatisticsError(ValueError):
    pass


def _samples(samples, minimum: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise StatisticsError(f"need at least {minimum} samples, got {x.size}")
    return x


def mean_ci(samples: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Mean and normal-approximation half-width ``1.96 * s / sqrt(n)``."""
    if level != 0.95:
        raise NotImplementedError("only the 95% interval is supported")
    x = _samples(samples, 2)
    return float(np.mean(x)), Z_95 * float(np.std(x, ddof=1)) / math.sqrt(x.size)


def pearson_skew(samples: Sequence[float]) -> float:
    """Pearson's second skewness coefficient ``3 (mean - median) / s``."""
    x = _samples(samples, 2)
    s = float(np.std(x, ddof=1))
    if s == 0.0:
        raise StatisticsError("zero standard deviation; skewness undefined")
    return 3.0 * (float(np.mean(x)) - float(np.median(x))) / s


def excess_kurtosis(samples: Sequence[float]) -> float:
    """Fisher kurtosis ``m4 / m2**2 - 3`` from biased central moments."""
    x = _samples(samples, 4)
    d = x - np.mean(x)
    m2 = float(np.mean(d ** 2))
    if m2 == 0.0:
        raise StatisticsError("zero variance; kurtosis undefined")
    return float(np.mean(d ** 4)) / (m2 * m2) - 3.0


@dataclass(frozen=True)
class CoefficientStats:
    mean: float
    std: Optional[float]
    ci_half_width: Optional[float]
    skewness: Optional[float]
    kurtosis: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def _maybe(fn, x):
    try:
        return fn(x)
    except StatisticsError:
        return None


def describe(samples: Sequence[float]) -> CoefficientStats:
    """All per-coefficient statistics; undefined ones come back as ``None``."""
    x = _samples(samples, 1)
    if x.size < 2:
        return CoefficientStats(float(x[0]), None, None, None, None)
    mean, half = mean_ci(x)
    return CoefficientStats(
        mean=mean,
        std=float(np.std(x, ddof=1)),
        ci_half_width=half,
        skewness=_maybe(pearson_skew, x),
        kurtosis=_maybe(excess_kurtosis, x),
    )


def histogram(values: Sequence[float], width: float = 0.02, upper: float = 1.0):
    """Fixed-width bins on ``[0, upper]``; returns ``(rows, overflow)``.

    ``rows`` holds ``(bin_low, bin_high, count)``; the last bin is closed on
    the right and values above ``upper`` are only counted in ``overflow``.
    """
    v = np.asarray(values, dtype=float)
    n_bins = int(round(upper / width))
    edges = np.linspace(0.0, upper, n_bins + 1)
    counts, _ = np.histogram(v[v <= upper], bins=edges)
    rows = [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return rows, int(np.sum(v > upper))
