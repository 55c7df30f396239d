"""Extremal-process extraction, decoration sampling and limit-law fitting.

The decoration law is sampled by plain rejection: run the second-phase law to
depth n, accept when the maximum beats the linear threshold kappa'(theta)*n,
and record the point cloud seen from the maximum.  Rejection keeps the
conditional samples exactly distributed, which is why everything else in the
extreme-value suites can treat them as ground truth.

The limit-law fit estimates the shift constant of the randomly shifted Gumbel
mixture  F(y) = E[exp(-lambda * W * exp(-theta*y))]  by minimising the KS
distance to an empirical CDF of centered maxima over lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import rng as rngmod
from .engine import SimulationPlan, simulate
from .errors import (
    CoverageError,
    FitAmbiguityError,
    PartialResultError,
    UnsupportedConfigurationError,
)
from .laws import ReproductionLaw, kappa_derivatives
from .pointproc import DecorationOrigin, ExtremalProcessOrigin, PointSample, RampFunction
from .stats import EmpiricalCdf, FitResult


@dataclass(frozen=True)
class DecorationResult:
    samples: List[PointSample]
    acceptance_rate: float
    rate_ci: Tuple[float, float]
    trials: int
    overshoots: np.ndarray


def _wilson_interval(successes: int, trials: int, z: float = 1.96) -> Tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


def sample_decoration(
    law2: ReproductionLaw,
    theta: float,
    n: int,
    target_accepts: int,
    master_seed: int,
    budget: int,
    depth_window: Optional[float] = None,
) -> DecorationResult:
    """Unbiased conditional samples of the point process seen from the maximum.

    Trials are independent replicates; acceptance requires the depth-n maximum
    to reach kappa'(theta)*n.  Points deeper than ``depth_window`` below the
    maximum are discarded, and the window is recorded on every sample so that
    Laplace-functional evaluations can verify coverage.
    """
    tp = kappa_derivatives(law2, theta)
    gap = theta * tp.kappa_prime - tp.kappa
    if gap <= 0:
        raise UnsupportedConfigurationError(
            f"theta*kappa' - kappa = {gap} <= 0: the conditioning event is not "
            "a front deviation for this law/tilt"
        )
    if depth_window is None:
        depth_window = 15.0 / theta
    threshold = tp.kappa_prime * n
    samples: List[PointSample] = []
    overshoots = []
    trials = 0
    while len(samples) < target_accepts and trials < budget:
        plan = SimulationPlan(spec=law2, n=n, master_seed=master_seed,
                              replicate=trials, rng_mode="stream")
        result = simulate(plan)
        trials += 1
        pos = result.final.positions
        if pos.size == 0:
            continue
        m = float(pos.max())
        if m < threshold:
            continue
        rel = pos - m
        pts = np.sort(rel[rel >= -depth_window], kind="stable")[::-1]
        origin = DecorationOrigin(n=n, threshold=threshold,
                                  depth_window=depth_window, overshoot=m - threshold)
        samples.append(PointSample(points=pts, origin=origin))
        overshoots.append(m - threshold)
    rate = len(samples) / trials if trials else 0.0
    if len(samples) < target_accepts:
        raise PartialResultError(
            f"budget of {budget} trials produced only {len(samples)} of "
            f"{target_accepts} accepted samples (rate {rate:.3g})",
            accepted=len(samples), acceptance_rate=rate,
        )
    return DecorationResult(samples, rate, _wilson_interval(len(samples), trials),
                            trials, np.asarray(overshoots))


def empirical_laplace(samples: List[PointSample], phi: RampFunction) -> Tuple[float, float]:
    """Mean and standard error of exp(-sum phi(points)) over the samples.

    Raises CoverageError if phi can see below a sample's recorded window
    (discarded points would have contributed).
    """
    if not samples:
        raise ValueError("empirical_laplace needs at least one sample")
    vals = np.empty(len(samples))
    for i, s in enumerate(samples):
        if isinstance(s.origin, DecorationOrigin):
            floor = -s.origin.depth_window
        elif isinstance(s.origin, ExtremalProcessOrigin):
            floor = s.origin.cutoff
        else:  # pragma: no cover
            floor = -math.inf
        if phi.support_left_bound < floor:
            raise CoverageError(
                f"ramp support starts at {phi.support_left_bound} below the "
                f"sample floor {floor}; discarded points would contribute"
            )
        vals[i] = math.exp(-float(np.sum(phi(s.points))))
    stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(vals.mean()), stderr


def gumbel_mixture_cdf(w_samples: np.ndarray, lam: float, theta: float, y) -> np.ndarray:
    """Empirical mixture CDF  mean_j exp(-lam * w_j * exp(-theta*y))."""
    w = np.asarray(w_samples, dtype=float)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.exp(-lam * np.outer(np.exp(-theta * ys), w)).mean(axis=1)
    return out if np.ndim(y) else float(out[0])


def _ks_against_mixture(sorted_maxima: np.ndarray, w: np.ndarray,
                        lam: float, theta: float) -> float:
    n = sorted_maxima.size
    f = gumbel_mixture_cdf(w, lam, theta, sorted_maxima)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - f), np.max(f - lo)))


def _golden_min(objective, log_lo: float, log_hi: float, tol: float = 1e-4):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = log_lo, log_hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = objective(math.exp(c)), objective(math.exp(d))
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(math.exp(d))
    lam = math.exp((a + b) / 2.0)
    return lam, objective(lam)


_GRID = np.linspace(-4.0, 4.0, 81)  # log10 lambda pre-scan


def fit_shift_constant(
    max_cdf: EmpiricalCdf,
    w_samples: np.ndarray,
    theta: float,
    n: int = 0,
    bootstrap_reps: int = 200,
    seed: int = 0,
) -> FitResult:
    """lambda_hat = argmin over lambda of the KS distance between the centered
    maxima and the mixture CDF; sup-norm metric, golden-section on log lambda,
    percentile-bootstrap interval (widened to contain the point estimate)."""
    w = np.asarray(w_samples, dtype=float)
    if w.size == 0:
        raise ValueError("fit needs a non-empty sample of martingale limits")
    maxima = max_cdf.sorted_values

    profile = np.array([
        _ks_against_mixture(maxima, w, 10.0 ** g, theta) for g in _GRID
    ])
    best = int(np.argmin(profile))
    # a second local minimum materially below the flat tails means the fit
    # is ambiguous
    interior = profile[1:-1]
    local_min = (interior < profile[:-2]) & (interior <= profile[2:])
    idx = np.flatnonzero(local_min) + 1
    material = [i for i in idx if profile[i] < profile[best] + 0.02]
    if len(material) > 1 and (max(material) - min(material)) > 3:
        raise FitAmbiguityError(
            f"KS profile has {len(material)} separated local minima over the "
            "lambda pre-scan grid"
        )
    if best == 0 or best == len(_GRID) - 1:
        raise FitAmbiguityError("lambda profile minimised at the scan boundary")

    lo = math.log(10.0 ** _GRID[best - 1])
    hi = math.log(10.0 ** _GRID[best + 1])
    lam_hat, ks_at_fit = _golden_min(
        lambda lam: _ks_against_mixture(maxima, w, lam, theta), lo, hi
    )

    # bootstrap over both inputs on quantile-compressed maxima for speed
    gen = rngmod.replicate_stream(seed, 9, 0)
    comp = maxima if maxima.size <= 512 else np.sort(
        np.quantile(maxima, (np.arange(512) + 0.5) / 512)
    )
    boots = []
    for _ in range(max(bootstrap_reps, 1)):
        bm = np.sort(comp[gen.integers(0, comp.size, comp.size)])
        bw = w[gen.integers(0, w.size, min(w.size, 512))]
        lam_b, _ = _golden_min(
            lambda lam: _ks_against_mixture(bm, bw, lam, theta), lo, hi, tol=1e-3
        )
        boots.append(lam_b)
    lo_ci = min(float(np.quantile(boots, 0.05)), lam_hat)
    hi_ci = max(float(np.quantile(boots, 0.95)), lam_hat)
    return FitResult(lambda_hat=lam_hat, ks_at_fit=ks_at_fit,
                     bootstrap_ci=(lo_ci, hi_ci), theta=theta, n=n,
                     w_sample_count=w.size)
