"""Reproduction laws for branching random walks.

A law is a point process of child displacements.  Three families are
supported:

* ``DeterministicCount``: a fixed number ``k`` of i.i.d. displacements;
* ``PoissonCount``: a Poisson(lam) number of i.i.d. displacements;
* ``FiniteAtomic``: an explicit finite mixture of displacement multisets,
  which is the escape hatch for dependent broods and exact enumeration.

The module owns the log-Laplace transform ``kappa`` and its tilted first and
second moments, the plain offspring sampler, the size-biased brood sampler,
and the tilted single-step sampler of the associated many-to-one walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateLawError, LawValidationError, TiltDomainError

_PROB_TOL = 1e-12


# ---------------------------------------------------------------------------
# displacement distributions (i.i.d. within a brood)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if self.variance <= 0:
            raise LawValidationError("Gaussian displacement needs variance > 0")

    def log_mgf(self, theta):
        return self.mean * theta + 0.5 * self.variance * theta * theta

    def tilted_mean(self, theta):
        return self.mean + self.variance * theta

    def tilted_var(self, theta):
        return self.variance

    def finite_interval(self):
        return (-math.inf, math.inf)

    def sample(self, rng, size):
        return rng.normal(self.mean, math.sqrt(self.variance), size)

    def sample_tilted(self, rng, theta, size):
        return rng.normal(self.tilted_mean(theta), math.sqrt(self.variance), size)

    def is_lattice(self):
        return False


@dataclass(frozen=True)
class Laplace:
    """Standard Laplace displacement, density exp(-|x|)/2; scale fixed to 1."""

    def log_mgf(self, theta):
        if abs(theta) >= 1.0:
            return math.inf
        return -math.log1p(-theta * theta)

    def tilted_mean(self, theta):
        return 2.0 * theta / (1.0 - theta * theta)

    def tilted_var(self, theta):
        return 2.0 * (1.0 + theta * theta) / (1.0 - theta * theta) ** 2

    def finite_interval(self):
        return (-1.0, 1.0)

    def sample(self, rng, size):
        return self.sample_tilted(rng, 0.0, size)

    def sample_tilted(self, rng, theta, size):
        # density ~ exp(theta*x - |x|): two exponential flanks, exact inverse CDF
        if abs(theta) >= 1.0:
            raise TiltDomainError(f"Laplace tilt |theta|={abs(theta)} >= 1")
        u = rng.random(size)
        p_left = (1.0 - theta) / 2.0
        x = np.empty(np.shape(u))
        left = u < p_left
        x[left] = np.log(2.0 * u[left] / (1.0 - theta)) / (1.0 + theta)
        x[~left] = -np.log(2.0 * (1.0 - u[~left]) / (1.0 + theta)) / (1.0 - theta)
        return x

    def is_lattice(self):
        return False


@dataclass(frozen=True)
class PointMasses:
    values: tuple
    probs: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.size == 0 or v.size != p.size:
            raise LawValidationError("PointMasses needs matching non-empty values/probs")
        if np.any(p < 0) or abs(p.sum() - 1.0) > _PROB_TOL:
            raise LawValidationError("PointMasses probabilities must be >= 0 and sum to 1")

    def _vp(self):
        return np.asarray(self.values, float), np.asarray(self.probs, float)

    def log_mgf(self, theta):
        v, p = self._vp()
        return float(logsumexp(theta * v + np.log(p)))

    def tilted_mean(self, theta):
        v, p = self._vp()
        w = np.exp(theta * v + np.log(p) - self.log_mgf(theta))
        return float(np.sum(w * v))

    def tilted_var(self, theta):
        v, p = self._vp()
        w = np.exp(theta * v + np.log(p) - self.log_mgf(theta))
        m = np.sum(w * v)
        return float(np.sum(w * (v - m) ** 2))

    def finite_interval(self):
        return (-math.inf, math.inf)

    def sample(self, rng, size):
        return self.sample_tilted(rng, 0.0, size)

    def sample_tilted(self, rng, theta, size):
        v, p = self._vp()
        w = np.exp(theta * v + np.log(p) - self.log_mgf(theta))
        idx = np.searchsorted(np.cumsum(w), rng.random(size), side="right")
        return v[np.minimum(idx, v.size - 1)]

    def is_lattice(self):
        return _values_on_lattice(np.asarray(self.values, float))


Displacement = Union[Gaussian, Laplace, PointMasses]


def _values_on_lattice(values, tol=1e-12):
    """True iff all values lie on some a + b*Z grid (tolerance 1e-12)."""
    vals = np.unique(values)
    if vals.size <= 1:
        return True
    diffs = vals[1:] - vals[0]
    g = diffs[0]
    for d in diffs[1:]:
        a, b = max(abs(g), abs(d)), min(abs(g), abs(d))
        while b > tol:
            a, b = b, math.fmod(a, b)
        g = a
    if g <= tol:
        return False
    return bool(np.all(np.abs(diffs / g - np.round(diffs / g)) < 1e-9))


# ---------------------------------------------------------------------------
# reproduction laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReproductionLaw:
    """A point-process offspring law.

    ``family`` is one of ``"deterministic"``, ``"poisson"``,
    ``"finite_atomic"``.  The count families carry ``count_param`` (fixed
    count k, or Poisson mean) and an i.i.d. ``displacement``; the atomic
    family carries ``atoms`` as a tuple of ``(probability, displacements)``
    pairs with displacements stored non-increasing (ties keep given order).
    """

    family: str
    count_param: float = 0.0
    displacement: Optional[Displacement] = None
    atoms: tuple = field(default=())

    def __post_init__(self):
        if self.family in ("deterministic", "poisson"):
            if self.displacement is None:
                raise LawValidationError(f"{self.family} family needs a displacement")
            if self.family == "deterministic":
                k = self.count_param
                if k != int(k) or k < 1:
                    raise LawValidationError("deterministic count must be an integer >= 1")
            elif self.count_param <= 0:
                raise LawValidationError("poisson mean must be > 0")
        elif self.family == "finite_atomic":
            if not self.atoms:
                raise LawValidationError("finite_atomic law needs at least one atom group")
            total = 0.0
            sorted_atoms = []
            for prob, points in self.atoms:
                pts = np.asarray(points, dtype=float)
                if pts.size == 0:
                    raise LawValidationError("empty displacement multiset in finite_atomic atom")
                if prob < 0:
                    raise LawValidationError("negative probability in finite_atomic atom")
                total += prob
                order = np.argsort(-pts, kind="stable")
                sorted_atoms.append((float(prob), tuple(pts[order])))
            if abs(total - 1.0) > _PROB_TOL:
                raise LawValidationError(f"finite_atomic probabilities sum to {total}, not 1")
            object.__setattr__(self, "atoms", tuple(sorted_atoms))
        else:
            raise LawValidationError(f"unknown family {self.family!r}")

    # -- helpers -----------------------------------------------------------

    def finite_interval(self):
        if self.family == "finite_atomic":
            return (-math.inf, math.inf)
        return self.displacement.finite_interval()

    def mean_count(self):
        if self.family == "deterministic":
            return float(self.count_param)
        if self.family == "poisson":
            return float(self.count_param)
        return float(sum(p * len(a) for p, a in self.atoms))

    def all_displacement_values(self):
        """Union of possible displacement values; None for continuous laws."""
        if self.family == "finite_atomic":
            return np.unique(np.concatenate([np.asarray(a) for _, a in self.atoms]))
        if isinstance(self.displacement, PointMasses):
            return np.unique(np.asarray(self.displacement.values, float))
        return None

    def scaled(self, c: float) -> "ReproductionLaw":
        """The law with every displacement multiplied by c > 0."""
        if c <= 0:
            raise LawValidationError("scale factor must be > 0")
        if self.family == "finite_atomic":
            atoms = tuple((p, tuple(c * x for x in a)) for p, a in self.atoms)
            return ReproductionLaw("finite_atomic", atoms=atoms)
        d = self.displacement
        if isinstance(d, Gaussian):
            nd = Gaussian(c * d.mean, c * c * d.variance)
        elif isinstance(d, PointMasses):
            nd = PointMasses(tuple(c * v for v in d.values), d.probs)
        else:
            raise LawValidationError("Laplace scale is fixed; cannot rescale")
        return ReproductionLaw(self.family, self.count_param, nd)


# canonical laws used throughout the test suites
def binary_gaussian(variance: float = 1.0, mean: float = 0.0) -> ReproductionLaw:
    return ReproductionLaw("deterministic", 2, Gaussian(mean, variance))


def single_child_at(value: float) -> ReproductionLaw:
    return ReproductionLaw("finite_atomic", atoms=((1.0, (value,)),))


def rademacher_pair() -> ReproductionLaw:
    """One brood {+1, -1} with probability 1 (lattice, no critical tilt)."""
    return ReproductionLaw("finite_atomic", atoms=((1.0, (1.0, -1.0)),))


@dataclass(frozen=True)
class TiltParams:
    """kappa and its tilted first/second moments at a working tilt."""

    theta: float
    kappa: float
    kappa_prime: float
    kappa_double_prime: float


# ---------------------------------------------------------------------------
# log-Laplace transform and derivatives
# ---------------------------------------------------------------------------

def kappa(law: ReproductionLaw, theta: float) -> float:
    """log E[sum over brood of exp(theta * displacement)]; +inf outside the
    finiteness interval (sentinel, never raises)."""
    if law.family == "finite_atomic":
        terms = []
        for p, pts in law.atoms:
            if p == 0.0:
                continue
            terms.append(math.log(p) + logsumexp(theta * np.asarray(pts)))
        return float(logsumexp(terms))
    lm = law.displacement.log_mgf(theta)
    if not math.isfinite(lm):
        return math.inf
    return math.log(law.count_param) + lm


def kappa_derivatives(law: ReproductionLaw, theta: float) -> TiltParams:
    """Tilted mean and variance of a displacement at tilt theta.

    Raises TiltDomainError outside the finiteness interval and
    DegenerateLawError when the tilted variance vanishes.
    """
    k = kappa(law, theta)
    if not math.isfinite(k):
        raise TiltDomainError(f"kappa is infinite at theta={theta}")
    if law.family == "finite_atomic":
        logs, vals = [], []
        for p, pts in law.atoms:
            if p == 0.0:
                continue
            for x in pts:
                logs.append(math.log(p) + theta * x)
                vals.append(x)
        w = np.exp(np.asarray(logs) - k)
        vals = np.asarray(vals)
        kp = float(np.sum(w * vals))
        kpp = float(np.sum(w * (vals - kp) ** 2))
    else:
        kp = law.displacement.tilted_mean(theta)
        kpp = law.displacement.tilted_var(theta)
    if kpp <= 0.0:
        raise DegenerateLawError(
            f"tilted variance kappa''({theta}) = {kpp} violates the working assumption"
        )
    return TiltParams(theta, k, kp, kpp)


# ---------------------------------------------------------------------------
# samplers (rng is a caller-owned numpy Generator)
# ---------------------------------------------------------------------------

def _sorted_desc(x: np.ndarray) -> np.ndarray:
    return np.sort(x, kind="stable")[::-1]


def sample_offspring(law: ReproductionLaw, rng: np.random.Generator) -> np.ndarray:
    """One brood of displacements, ranked non-increasing."""
    if law.family == "finite_atomic":
        j = _pick_atom(law, rng, tilt=None)
        return np.asarray(law.atoms[j][1])  # stored sorted at construction
    if law.family == "deterministic":
        n = int(law.count_param)
    else:
        n = int(rng.poisson(law.count_param))
        if n == 0:
            return np.empty(0)
    return _sorted_desc(law.displacement.sample(rng, n))


def _pick_atom(law, rng, tilt):
    probs = np.array([p for p, _ in law.atoms])
    if tilt is not None:
        weights = np.array(
            [p * math.exp(logsumexp(tilt * np.asarray(a))) for p, a in law.atoms]
        )
        probs = weights / weights.sum()
    c = np.cumsum(probs)
    return int(min(np.searchsorted(c, rng.random(), side="right"), len(c) - 1))


def sample_size_biased_offspring(
    law: ReproductionLaw, theta: float, rng: np.random.Generator
) -> np.ndarray:
    """One brood from the law biased by sum exp(theta*l - kappa).

    FiniteAtomic outcomes are reweighted exactly.  For the i.i.d.-displacement
    families the biased brood is sampled exactly as one theta-tilted
    displacement plus the plain rest (fixed count: k-1 plain companions;
    Poisson: an independent plain brood), which is an exact representation of
    the size-biased point process.
    """
    if not math.isfinite(kappa(law, theta)):
        raise TiltDomainError(f"kappa infinite at theta={theta}; cannot size-bias")
    if law.family == "finite_atomic":
        j = _pick_atom(law, rng, tilt=theta)
        return np.asarray(law.atoms[j][1])
    special = law.displacement.sample_tilted(rng, theta, 1)
    if law.family == "deterministic":
        rest = law.displacement.sample(rng, int(law.count_param) - 1)
    else:
        rest = law.displacement.sample(rng, int(rng.poisson(law.count_param)))
    return _sorted_desc(np.concatenate([special, rest]))


def sample_tilted_step(law: ReproductionLaw, theta: float, rng: np.random.Generator) -> float:
    """One step of the many-to-one walk: E f(S1) = E[sum f(l) exp(theta*l - kappa)]."""
    k = kappa(law, theta)
    if not math.isfinite(k):
        raise TiltDomainError(f"kappa infinite at theta={theta}; no tilted step")
    if law.family == "finite_atomic":
        logs, vals = [], []
        for p, pts in law.atoms:
            if p == 0.0:
                continue
            for x in pts:
                logs.append(math.log(p) + theta * x)
                vals.append(x)
        w = np.exp(np.asarray(logs) - k)
        c = np.cumsum(w)
        i = int(min(np.searchsorted(c, rng.random(), side="right"), len(c) - 1))
        return float(vals[i])
    # count family cancels: the step is just the tilted displacement
    return float(law.displacement.sample_tilted(rng, theta, 1)[0])


def tilted_steps(law: ReproductionLaw, theta: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorised i.i.d. tilted steps (same law as sample_tilted_step)."""
    k = kappa(law, theta)
    if not math.isfinite(k):
        raise TiltDomainError(f"kappa infinite at theta={theta}; no tilted step")
    if law.family == "finite_atomic":
        logs, vals = [], []
        for p, pts in law.atoms:
            if p == 0.0:
                continue
            for x in pts:
                logs.append(math.log(p) + theta * x)
                vals.append(x)
        w = np.exp(np.asarray(logs) - k)
        idx = np.searchsorted(np.cumsum(w), rng.random(size), side="right")
        return np.asarray(vals)[np.minimum(idx, len(vals) - 1)]
    return law.displacement.sample_tilted(rng, theta, size)


# ---------------------------------------------------------------------------
# assumption report
# ---------------------------------------------------------------------------

HOLDS_ANALYTICALLY = "holds-analytically"
HOLDS_NUMERICALLY = "holds-numerically"
ASSUMED = "assumed"
VIOLATED = "violated"


@dataclass(frozen=True)
class AssumptionVerdict:
    status: str
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    entries: dict

    def status(self, name: str) -> str:
        return self.entries[name].status

    def holds(self, name: str) -> bool:
        return self.entries[name].status in (HOLDS_ANALYTICALLY, HOLDS_NUMERICALLY)


def _theta_star_scan(law, lo=1e-4, n_grid=96):
    """Sign-scan of g(theta) = theta*kappa'(theta) - kappa(theta); g is
    increasing where defined, so a positive value certifies a root."""
    _, hi = law.finite_interval()
    hi = min(hi, 64.0) if math.isfinite(hi) else 64.0
    for theta in np.geomspace(lo, hi * (1 - 1e-9), n_grid):
        try:
            tp = kappa_derivatives(law, float(theta))
        except (TiltDomainError, DegenerateLawError):
            continue
        if theta * tp.kappa_prime - tp.kappa > 0:
            return True
    return False


def check_assumptions(law: ReproductionLaw, theta: float) -> AssumptionReport:
    """Per-assumption verdicts at the working tilt.

    Covers supercriticality/survival, positive finite tilted variance,
    the X log X moment, the non-lattice condition, existence of the critical
    tilt, and the boundary-case moments used by the slow-regime results.
    Moment conditions are analytic facts for every built-in family whenever
    the tilt is interior to the finiteness interval.
    """
    e = {}
    # survival: P(no children) = 0 and P(exactly one child) < 1
    if law.family == "deterministic":
        k = int(law.count_param)
        if k >= 2:
            e["survival"] = AssumptionVerdict(HOLDS_ANALYTICALLY, f"fixed count {k}")
        else:
            e["survival"] = AssumptionVerdict(VIOLATED, "single child with probability 1")
    elif law.family == "poisson":
        p0 = math.exp(-law.count_param)
        e["survival"] = AssumptionVerdict(VIOLATED, f"P(no children) = {p0:.3g} > 0")
    else:
        if all(len(a) == 1 for _, a in law.atoms):
            e["survival"] = AssumptionVerdict(VIOLATED, "every outcome has exactly one child")
        else:
            e["survival"] = AssumptionVerdict(HOLDS_ANALYTICALLY, "no empty atom group")

    lo, hi = law.finite_interval()
    interior = lo < theta < hi
    try:
        tp = kappa_derivatives(law, theta)
        if tp.kappa_double_prime > 0:
            status = HOLDS_ANALYTICALLY if law.family != "finite_atomic" else HOLDS_NUMERICALLY
            e["as1"] = AssumptionVerdict(status, f"kappa''={tp.kappa_double_prime:.6g}")
        else:  # pragma: no cover - kappa_derivatives raises first
            e["as1"] = AssumptionVerdict(VIOLATED, "kappa'' <= 0")
    except DegenerateLawError as err:
        e["as1"] = AssumptionVerdict(VIOLATED, str(err))
    except TiltDomainError as err:
        e["as1"] = AssumptionVerdict(VIOLATED, str(err))

    if interior:
        e["as3"] = AssumptionVerdict(
            HOLDS_ANALYTICALLY, "X log+ X finite: tilt interior to finiteness interval"
        )
        e["as8"] = AssumptionVerdict(
            HOLDS_ANALYTICALLY, "X(log+ X)^2 and Xtilde log+ Xtilde finite for built-ins"
        )
    else:
        e["as3"] = AssumptionVerdict(VIOLATED, "tilt at or beyond finiteness boundary")
        e["as8"] = AssumptionVerdict(VIOLATED, "tilt at or beyond finiteness boundary")

    vals = law.all_displacement_values()
    if vals is None:
        e["as4"] = AssumptionVerdict(HOLDS_ANALYTICALLY, "continuous displacement law")
    elif _values_on_lattice(vals):
        e["as4"] = AssumptionVerdict(VIOLATED, f"atoms lie on a lattice: {vals.tolist()}")
    else:
        e["as4"] = AssumptionVerdict(HOLDS_NUMERICALLY, "no common lattice at 1e-12")

    if e["as1"].status == VIOLATED:
        e["as6"] = AssumptionVerdict(VIOLATED, "degenerate law has no critical tilt")
        e["as7"] = AssumptionVerdict(ASSUMED, "not evaluated: as1 violated")
    elif _theta_star_scan(law):
        e["as6"] = AssumptionVerdict(HOLDS_NUMERICALLY, "sign change of theta*kappa'-kappa found")
        e["as7"] = AssumptionVerdict(
            HOLDS_ANALYTICALLY if law.family != "finite_atomic" else HOLDS_NUMERICALLY,
            "tilted variance positive at the critical tilt",
        )
    else:
        e["as6"] = AssumptionVerdict(VIOLATED, "theta*kappa' - kappa < 0 on the whole interval")
        e["as7"] = AssumptionVerdict(ASSUMED, "not evaluated: no critical tilt")

    return AssumptionReport(e)
