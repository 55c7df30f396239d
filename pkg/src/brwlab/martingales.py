"""Additive and derivative martingales and the CLT-weighted functionals.

All reductions run through fixed-block compensated summation because the
weights exp(theta*V - n*kappa) span many orders of magnitude; block structure
keeps parallel reductions deterministic.

Martingale values are only meaningful on unpruned snapshots: the bulk of the
additive-martingale mass sits far behind the front whenever the tilt is
subcritical, so any front-localised pruning would bias it.  Pruned snapshots
are refused outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .engine import PopulationSnapshot
from .errors import MissingAnnotationsError, PrunedSnapshotError, TruncationParameterError

_BLOCK = 1 << 15

ADDITIVE = "additive"
DERIVATIVE = "derivative"
CLT_FUNCTIONAL = "clt"
TRUNCATED_CLT_FUNCTIONAL = "clt-truncated"


def kahan_block_sum(values: np.ndarray) -> float:
    """Compensated sum: pairwise numpy sums over fixed blocks, Kahan across."""
    total = 0.0
    carry = 0.0
    for start in range(0, values.size, _BLOCK):
        v = float(np.sum(values[start:start + _BLOCK])) + carry
        t = total + v
        carry = v - (t - total)
        total = t
    return total


# ---------------------------------------------------------------------------
# registered bounded test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClampedRamp:
    lo: float
    hi: float

    def __call__(self, x):
        return np.clip((np.asarray(x, float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    @property
    def sup_norm(self):
        return 1.0

    @property
    def name(self):
        return f"ramp[{self.lo:g},{self.hi:g}]"


@dataclass(frozen=True)
class CosineBump:
    center: float
    halfwidth: float

    def __call__(self, x):
        z = (np.asarray(x, float) - self.center) / self.halfwidth
        return np.where(np.abs(z) < 1.0, 0.5 * (1.0 + np.cos(np.pi * z)), 0.0)

    @property
    def sup_norm(self):
        return 1.0

    @property
    def name(self):
        return f"bump[{self.center:g}±{self.halfwidth:g}]"


@dataclass(frozen=True)
class ConstantFn:
    value: float

    def __call__(self, x):
        return np.full(np.shape(x), self.value)

    @property
    def sup_norm(self):
        return abs(self.value)

    @property
    def name(self):
        return f"const[{self.value:g}]"


TestFunction = Union[ClampedRamp, CosineBump, ConstantFn]


@dataclass(frozen=True)
class CltSpec:
    f: TestFunction
    gaussian_variance: float


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(41)


def expectation_under_gaussian(f, variance: float) -> float:
    """E f(N(0, variance)) by 41-node Gauss-Hermite quadrature."""
    x = math.sqrt(2.0 * variance) * _GH_NODES
    return float(np.sum(_GH_WEIGHTS * f(x)) / math.sqrt(math.pi))


# ---------------------------------------------------------------------------
# martingale evaluations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MartingaleValue:
    kind: str
    n: int
    theta: float
    value: float
    params: Optional[str] = None


def _require_unpruned(snapshot):
    if snapshot.pruned_mass_flag:
        raise PrunedSnapshotError(
            "martingale on a pruned snapshot would be biased: additive mass "
            "is not front-localised under a subcritical tilt"
        )


def additive_martingale(snapshot: PopulationSnapshot, theta: float, kappa: float) -> MartingaleValue:
    """W_n = sum exp(theta*V - n*kappa) over the snapshot's generation."""
    _require_unpruned(snapshot)
    n = snapshot.generation
    w = np.exp(theta * snapshot.positions - n * kappa)
    return MartingaleValue(ADDITIVE, n, theta, kahan_block_sum(w))


def derivative_martingale(snapshot: PopulationSnapshot, theta_star: float, kappa: float) -> MartingaleValue:
    """Z_n = sum (kappa'*n - V) exp(theta*V - n*kappa) at the critical tilt,
    where kappa' = kappa/theta_star by definition of the critical tilt."""
    _require_unpruned(snapshot)
    if not (theta_star > 0 and math.isfinite(theta_star)):
        raise ValueError(f"theta_star must be a positive real, got {theta_star}")
    n = snapshot.generation
    kappa_prime = kappa / theta_star
    v = snapshot.positions
    terms = (kappa_prime * n - v) * np.exp(theta_star * v - n * kappa)
    return MartingaleValue(DERIVATIVE, n, theta_star, kahan_block_sum(terms))


def clt_functional(
    snapshot: PopulationSnapshot,
    theta: float,
    kappa: float,
    kappa_prime: float,
    spec: CltSpec,
) -> MartingaleValue:
    """Wbar_n = sum exp(theta*V - n*kappa) f((V - n*kappa')/sqrt(n))."""
    _require_unpruned(snapshot)
    n = snapshot.generation
    v = snapshot.positions
    terms = np.exp(theta * v - n * kappa) * spec.f((v - n * kappa_prime) / math.sqrt(n))
    return MartingaleValue(CLT_FUNCTIONAL, n, theta, kahan_block_sum(terms), spec.f.name)


def truncated_clt_functional(
    snapshot: PopulationSnapshot,
    theta: float,
    spec: CltSpec,
    A: float,
    a: float,
    L: float,
) -> MartingaleValue:
    """Wbar_{n,A}: the CLT functional restricted to particles whose whole
    trajectory satisfies both truncation events at threshold A."""
    _require_unpruned(snapshot)
    ann = snapshot.annotations
    if ann is None:
        raise MissingAnnotationsError(
            "truncated functional needs a snapshot simulated with annotations"
        )
    aspec = ann.spec
    if abs(aspec.theta - theta) > 1e-12 or abs(aspec.a - a) > 1e-12 or abs(aspec.L - L) > 1e-12:
        raise TruncationParameterError(
            f"annotation constants (theta={aspec.theta}, a={aspec.a}, L={aspec.L}) "
            f"do not match the request (theta={theta}, a={a}, L={L})"
        )
    n = snapshot.generation
    v = snapshot.positions
    if math.isinf(A) and A > 0:
        member = np.ones(v.size, dtype=bool)
    elif A <= 0:
        member = np.zeros(v.size, dtype=bool)
    else:
        member = (ann.sibling_weight_excess < math.log(A)) & (ann.path_max_excess <= A)
    terms = np.exp(theta * v - n * aspec.kappa) * spec.f((v - n * aspec.kappa_prime) / math.sqrt(n))
    value = kahan_block_sum(np.where(member, terms, 0.0))
    return MartingaleValue(TRUNCATED_CLT_FUNCTIONAL, n, theta, value,
                           f"{spec.f.name};A={A:g};a={a:g};L={L:g}")
