"""Critical tilts, regime classification and centering sequences.

The two-speed walk is parametrised by two laws and a split fraction t.  Its
behaviour is governed by the per-law critical tilts theta_i* (roots of
theta*kappa' = kappa) and the mixed tilt theta solving

    t*[theta*kappa1'(theta) - kappa1(theta)]
        + (1-t)*[theta*kappa2'(theta) - kappa2(theta)] = 0.

The regime is read off the sign of theta1* - theta2*: negative is slow,
zero (to tolerance) is mean, positive is fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateLawError,
    RootAbsentError,
    SolverError,
    TiltDomainError,
    UnsupportedConfigurationError,
)
from .laws import ReproductionLaw, kappa, kappa_derivatives

SLOW = "slow"
MEAN = "mean"
FAST = "fast"

MEAN_TOL = 1e-8       # |theta1* - theta2*| below this classifies as mean
ROOT_RESIDUAL = 1e-10
_SCAN_POINTS = 64
_MAX_ITER = 200


def _gap(law: ReproductionLaw, theta: float) -> float:
    """g(theta) = theta*kappa'(theta) - kappa(theta); increasing in theta."""
    tp = kappa_derivatives(law, theta)
    return theta * tp.kappa_prime - tp.kappa


def _scan_grid(laws, lo=1e-6):
    hi = min(
        min(law.finite_interval()[1] for law in laws), 512.0
    )
    if math.isfinite(hi):
        hi = hi * (1.0 - 1e-10)
    return np.geomspace(lo, hi, _SCAN_POINTS)


def _increasing_root(fn, grid, what: str) -> Optional[float]:
    """Root of an increasing function bracketed on a geometric grid.

    Returns None when the function stays negative over the whole grid
    (the root does not exist); raises SolverError on non-convergence.
    A value only counts as positive above a theta-scaled tolerance, so the
    floating noise of gap functions with a 0- asymptote (bounded-support
    laws without a critical tilt) cannot fake a sign change.
    """
    prev_t, prev_v = None, None
    for theta in grid:
        try:
            v = fn(float(theta))
        except (TiltDomainError, DegenerateLawError, OverflowError):
            continue
        if not math.isfinite(v):
            continue
        if v > 1e-10 * (1.0 + theta):
            if prev_t is None:
                # root below the scan floor; bracket down from here
                lo = theta / 2
                for _ in range(80):
                    try:
                        if fn(float(lo)) < 0:
                            break
                    except (TiltDomainError, DegenerateLawError):
                        break
                    lo /= 2
                prev_t, prev_v = lo, -1.0
            try:
                return float(brentq(fn, prev_t, theta, xtol=1e-15, rtol=1e-15,
                                    maxiter=_MAX_ITER))
            except RuntimeError as err:
                raise SolverError(
                    f"{what}: no convergence after {_MAX_ITER} iterations",
                    bracket=(float(prev_t), float(theta)),
                ) from err
        prev_t, prev_v = theta, v
    return None


def solve_theta_star(law: ReproductionLaw) -> Optional[float]:
    """The critical tilt: unique root of theta*kappa'(theta) = kappa(theta).

    Returns None when the gap stays negative on the whole finiteness
    interval (the boundary case where no critical tilt exists).
    """
    return _increasing_root(lambda t: _gap(law, t), _scan_grid([law]), "theta_star")


def solve_theta_mixed(law1: ReproductionLaw, law2: ReproductionLaw, t: float) -> float:
    if not 0.0 < t < 1.0:
        raise UnsupportedConfigurationError(f"split fraction t={t} must lie in (0,1)")
    grid = _scan_grid([law1, law2])
    root = _increasing_root(
        lambda th: t * _gap(law1, th) + (1.0 - t) * _gap(law2, th), grid, "theta_mixed"
    )
    if root is None:
        raise RootAbsentError(
            "mixed-tilt equation has no sign change on "
            f"({grid[0]:.3g}, {grid[-1]:.3g})"
        )
    return root


def speed(law: ReproductionLaw) -> float:
    """Almost-sure linear speed of the maximum: inf over theta of kappa/theta.

    Golden-section on the unimodal ratio; -inf sentinel for subcritical laws
    whose ratio diverges to -infinity near 0.
    """
    if law.mean_count() < 1.0:
        return -math.inf

    def ratio(theta):
        k = kappa(law, theta)
        return k / theta if math.isfinite(k) else math.inf

    grid = _scan_grid([law], lo=1e-6)
    vals = np.array([ratio(float(t)) for t in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if i == len(grid) - 1:
        # ratio still decreasing at the scan edge: approaches its infimum at
        # the boundary (finite-support laws); evaluate far out
        return ratio(float(grid[-1]) if math.isfinite(grid[-1]) else 1e6)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = ratio(math.exp(c)), ratio(math.exp(d))
    for _ in range(200):
        if b - a < 1e-13:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = ratio(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = ratio(math.exp(d))
    return ratio(math.exp((a + b) / 2.0))


@dataclass(frozen=True)
class RegimeSpec:
    """Two laws, split fraction, solved tilts and the regime tag."""

    law1: ReproductionLaw
    law2: ReproductionLaw
    t: float
    theta_mixed: float
    theta1_star: Optional[float]
    theta2_star: Optional[float]
    regime: str
    x_star1: float
    x_star2: float


def classify_regime(law1: ReproductionLaw, law2: ReproductionLaw, t: float) -> RegimeSpec:
    """RegimeSpec from the sign of theta1* - theta2*, cross-checked in the
    fast case against kappa1(theta) > theta*kappa1'(theta)."""
    th1 = solve_theta_star(law1)
    th2 = solve_theta_star(law2)
    if th1 is None or th2 is None:
        missing = "law1" if th1 is None else "law2"
        raise UnsupportedConfigurationError(
            f"critical tilt of {missing} does not exist; "
            "this laboratory requires both critical tilts"
        )
    theta = solve_theta_mixed(law1, law2, t)
    diff = th1 - th2
    if abs(diff) < MEAN_TOL:
        regime = MEAN
    elif diff > 0:
        regime = FAST
    else:
        regime = SLOW
    tp1 = kappa_derivatives(law1, theta)
    fast_condition = tp1.kappa > theta * tp1.kappa_prime + 1e-12
    if regime == FAST and not fast_condition:
        raise SolverError(
            f"regime disagreement: theta1*={th1} > theta2*={th2} but "
            f"kappa1(theta) <= theta*kappa1'(theta) at theta={theta}"
        )
    if regime == SLOW and fast_condition:
        raise SolverError(
            f"regime disagreement: theta1*={th1} < theta2*={th2} but "
            f"kappa1(theta) > theta*kappa1'(theta) at theta={theta}"
        )
    return RegimeSpec(
        law1=law1, law2=law2, t=t, theta_mixed=theta,
        theta1_star=th1, theta2_star=th2, regime=regime,
        x_star1=speed(law1), x_star2=speed(law2),
    )


# ---------------------------------------------------------------------------
# centering sequences
# ---------------------------------------------------------------------------

LOG_N = "log n"
LOG_TN = "log t_n"
LOG_N_MINUS_TN = "log(n - t_n)"

THEOREM = "theorem"
GENERIC = "generic"   # the phase-transition display variant


@dataclass(frozen=True)
class CenteringSequence:
    """m_n = lin1*t_n + lin2*(n - t_n) + sum of log terms, with t_n = floor(t*n)."""

    regime: str
    t: float
    linear_coeff_first: float
    linear_coeff_second: float
    log_coeffs: tuple  # of (coefficient, LOG_N | LOG_TN | LOG_N_MINUS_TN)

    def split_generation(self, n: int) -> int:
        x = self.t * n
        r = round(x)
        return int(r) if abs(x - r) < 1e-9 else int(math.floor(x))

    def evaluate(self, n: int) -> float:
        if n < 2:
            raise ValueError(f"centering needs n >= 2, got {n}")
        tn = self.split_generation(n)
        if tn < 1 or n - tn < 1:
            raise ValueError(f"degenerate split: t_n={tn} for n={n}, t={self.t}")
        val = self.linear_coeff_first * tn + self.linear_coeff_second * (n - tn)
        for coef, kind in self.log_coeffs:
            if kind == LOG_N:
                val += coef * math.log(n)
            elif kind == LOG_TN:
                val += coef * math.log(tn)
            else:
                val += coef * math.log(n - tn)
        return val


def centering_sequence(spec: RegimeSpec, variant: str = THEOREM) -> CenteringSequence:
    """The regime's centering sequence.

    The default is the limit-theorem form; ``variant=GENERIC`` selects the
    alternate display whose difference from the theorem form is a bounded
    sequence (identical linear terms, log terms merged into log n).
    """
    theta = spec.theta_mixed
    tp1 = kappa_derivatives(spec.law1, theta)
    tp2 = kappa_derivatives(spec.law2, theta)
    if spec.regime == FAST:
        if variant == THEOREM:
            return CenteringSequence(
                FAST, spec.t, tp1.kappa / theta, tp2.kappa / theta,
                ((-1.0 / (2.0 * theta), LOG_N),),
            )
        return CenteringSequence(
            FAST, spec.t, tp1.kappa_prime, tp2.kappa_prime,
            ((-1.0 / (2.0 * theta), LOG_N),),
        )
    if spec.regime == SLOW:
        s1 = kappa_derivatives(spec.law1, spec.theta1_star)
        s2 = kappa_derivatives(spec.law2, spec.theta2_star)
        if variant == THEOREM:
            logs = (
                (-1.5 / spec.theta1_star, LOG_TN),
                (-1.5 / spec.theta2_star, LOG_N_MINUS_TN),
            )
        else:
            logs = ((-1.5 / spec.theta1_star - 1.5 / spec.theta2_star, LOG_N),)
        return CenteringSequence(SLOW, spec.t, s1.kappa_prime, s2.kappa_prime, logs)
    # mean regime: conjectural form, stated with theta = theta1* (= theta2*)
    th = spec.theta1_star
    m1 = kappa_derivatives(spec.law1, th)
    m2 = kappa_derivatives(spec.law2, th)
    return CenteringSequence(
        MEAN, spec.t, m1.kappa_prime, m2.kappa_prime,
        ((-1.5 / th, LOG_N),),
    )


def centering(spec: RegimeSpec, n: int, variant: str = THEOREM) -> float:
    return centering_sequence(spec, variant).evaluate(n)
