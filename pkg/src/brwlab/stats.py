"""Empirical-distribution utilities shared by all verification suites."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from . import rng as rngmod
from .errors import InsufficientTailError


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical CDF over a sorted sample."""

    sorted_values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.sorted_values, dtype=float))
        if v.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        object.__setattr__(self, "sorted_values", v)

    @property
    def n_samples(self) -> int:
        return self.sorted_values.size

    def __call__(self, y):
        idx = np.searchsorted(self.sorted_values, np.asarray(y, dtype=float), side="right")
        return idx / self.n_samples

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.sorted_values, q))

    def iqr(self) -> float:
        return self.quantile(0.75) - self.quantile(0.25)


def ks_distance(a: EmpiricalCdf, b: Union[EmpiricalCdf, Callable]) -> float:
    """Sup-norm distance between an empirical CDF and another empirical CDF
    or an analytic CDF callable; exact over the union of jump points."""
    if isinstance(b, EmpiricalCdf):
        pts = np.union1d(a.sorted_values, b.sorted_values)
        return float(np.max(np.abs(a(pts) - b(pts))))
    x = a.sorted_values
    f = np.asarray(b(x), dtype=float)
    n = a.n_samples
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - f), np.max(f - lo)))


def tail_slope(cdf: EmpiricalCdf, y_lo: float, y_hi: float,
               grid_points: int = 20) -> Tuple[float, float]:
    """Least-squares slope of log(1 - F) on an even grid in [y_lo, y_hi].

    Requires at least 50 samples above y_lo; grid points whose empirical
    survival is zero are dropped.
    """
    if not y_lo < y_hi:
        raise ValueError(f"need y_lo < y_hi, got {y_lo} >= {y_hi}")
    n_above = int(np.sum(cdf.sorted_values > y_lo))
    if n_above < 50:
        raise InsufficientTailError(
            f"only {n_above} samples above y_lo={y_lo}; need at least 50"
        )
    ys = np.linspace(y_lo, y_hi, grid_points)
    surv = 1.0 - cdf(ys)
    keep = surv > 0
    ys, surv = ys[keep], surv[keep]
    if ys.size < 5:
        raise InsufficientTailError("fewer than 5 grid points carry tail mass")
    ls = np.log(surv)
    x = ys - ys.mean()
    sxx = float(np.sum(x * x))
    slope = float(np.sum(x * ls) / sxx)
    resid = ls - ls.mean() - slope * x
    dof = max(ys.size - 2, 1)
    stderr = math.sqrt(float(np.sum(resid * resid)) / dof / sxx)
    return slope, stderr


def bootstrap_ci(statistic: Callable, samples: np.ndarray, reps: int = 1000,
                 level: float = 0.9, seed: int = 0) -> Tuple[float, float]:
    """Percentile bootstrap interval; deterministic under the seed."""
    if reps <= 0:
        raise ValueError(f"bootstrap needs reps >= 1, got {reps}")
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("bootstrap needs a non-empty sample")
    gen = rngmod.replicate_stream(seed, 7, 0)
    stats = np.empty(reps)
    for r in range(reps):
        idx = gen.integers(0, samples.size, samples.size)
        stats[r] = statistic(samples[idx])
    alpha = (1.0 - level) / 2.0
    return float(np.quantile(stats, alpha)), float(np.quantile(stats, 1.0 - alpha))


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting the randomly shifted Gumbel mixture's constant."""

    lambda_hat: float
    ks_at_fit: float
    bootstrap_ci: Tuple[float, float]
    theta: float
    n: int
    w_sample_count: int

    def __post_init__(self):
        lo, hi = self.bootstrap_ci
        if not (lo <= self.lambda_hat <= hi):
            raise ValueError(
                f"fit {self.lambda_hat} outside its bootstrap interval ({lo}, {hi})"
            )
