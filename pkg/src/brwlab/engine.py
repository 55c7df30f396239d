"""Forward simulation of homogeneous and two-speed branching random walks.

One run advances a population generation by generation.  For a two-speed run
the reproduction law switches from law1 to law2 when the *child* generation
exceeds t_n = floor(t*n).  Pruning policies bound the population:

* ``Window(w)`` drops particles more than w below the current generation
  maximum (front-localised statistics only);
* ``TopK(k)`` keeps the k highest particles;
* no pruning keeps the exact tree, guarded by a hard particle budget.

Randomness comes in two flavours selected by ``SimulationPlan.rng_mode``:

* ``"lineage"`` (default): counter-based per-particle streams keyed by
  (master_seed, replicate, generation, lineage slot).  Draws are a pure
  function of a particle's lineage, so a pruned run consumes exactly the
  same displacements for surviving particles as the unpruned run - this is
  what pruning-oracle comparisons rely on.
* ``"stream"``: one sequential Philox stream per replicate.  Faster (numpy
  ziggurat), still bit-deterministic for a fixed plan, and independent of
  worker scheduling because parallelism is only ever across replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import rng as rngmod
from .errors import BudgetExceededError, LawValidationError, TruncationParameterError
from .laws import Gaussian, Laplace, PointMasses, ReproductionLaw, TiltParams
from .params import RegimeSpec
from .pointproc import ExtremalProcessOrigin, PointSample


@dataclass(frozen=True)
class Window:
    """Drop particles more than w below the current generation maximum.

    Two-speed runs may use a different width per phase (the working tilts
    differ); ``w_second`` applies after the law switch when given.
    """

    w: float
    w_second: Optional[float] = None

    def __post_init__(self):
        if not self.w > 0 or (self.w_second is not None and not self.w_second > 0):
            raise LawValidationError(f"window widths must be > 0, got {self}")

    def width_for(self, child_gen: int, split: int) -> float:
        if self.w_second is not None and child_gen > split:
            return self.w_second
        return self.w


@dataclass(frozen=True)
class TopK:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise LawValidationError(f"top-k must keep at least 1 particle, got {self.k}")


Pruning = Optional[Union[Window, TopK]]


def default_window(theta: float) -> Window:
    """Default pruning window 10/theta below the running maximum."""
    return Window(10.0 / theta)


@dataclass(frozen=True)
class AnnotationSpec:
    """Tilt data needed to accumulate truncation-event excesses per particle.

    Membership in the sibling-control event with threshold A is
    sibling_weight_excess < log A; membership in the below-the-line event is
    path_max_excess <= A.  The constants must satisfy
    a + theta*L + theta*kappa' - kappa < 0.
    """

    theta: float
    kappa: float
    kappa_prime: float
    a: float
    L: float

    def __post_init__(self):
        margin = self.a + self.theta * self.L + self.theta * self.kappa_prime - self.kappa
        if not margin < 0:
            raise TruncationParameterError(
                f"a + theta*L + theta*kappa' - kappa = {margin} must be negative"
            )


def default_truncation_constants(tp: TiltParams) -> tuple:
    """a = (kappa - theta*kappa')/4 and L = (kappa - theta*kappa')/(4*theta),
    which leave the required inequality strictly negative with slack."""
    gap = tp.kappa - tp.theta * tp.kappa_prime
    if gap <= 0:
        raise TruncationParameterError(
            "truncation constants need the subcritical tilt kappa > theta*kappa'"
        )
    return gap / 4.0, gap / (4.0 * tp.theta)


def annotation_spec_for(tp: TiltParams) -> AnnotationSpec:
    a, L = default_truncation_constants(tp)
    return AnnotationSpec(tp.theta, tp.kappa, tp.kappa_prime, a, L)


@dataclass(frozen=True)
class SimulationPlan:
    spec: Union[RegimeSpec, ReproductionLaw]
    n: int
    pruning: Pruning = None
    annotations: Optional[AnnotationSpec] = None
    master_seed: int = 0
    replicate: int = 0
    memory_budget: int = 50_000_000
    rng_mode: str = "lineage"

    def __post_init__(self):
        if self.n < 1:
            raise LawValidationError(f"horizon must be >= 1, got {self.n}")
        if self.rng_mode not in ("lineage", "stream"):
            raise LawValidationError(f"unknown rng_mode {self.rng_mode!r}")

    def law_for_child_generation(self, g: int) -> ReproductionLaw:
        if isinstance(self.spec, RegimeSpec):
            return self.spec.law1 if g <= self.split_generation() else self.spec.law2
        return self.spec

    def split_generation(self) -> int:
        if isinstance(self.spec, RegimeSpec):
            x = self.spec.t * self.n
            r = round(x)
            return int(r) if abs(x - r) < 1e-9 else int(math.floor(x))
        return self.n


@dataclass(frozen=True)
class TrajectoryAnnotations:
    spec: AnnotationSpec
    path_max_excess: np.ndarray
    sibling_weight_excess: np.ndarray


@dataclass(frozen=True)
class PopulationSnapshot:
    generation: int
    positions: np.ndarray
    annotations: Optional[TrajectoryAnnotations] = None
    pruned_mass_flag: bool = False


@dataclass(frozen=True)
class GenerationSummary:
    generation: int
    population: int
    max: float
    min: float


@dataclass(frozen=True)
class SimulationResult:
    final: PopulationSnapshot
    summaries: tuple


# ---------------------------------------------------------------------------
# brood expansion
# ---------------------------------------------------------------------------

def _atom_tables(law):
    probs = np.array([p for p, _ in law.atoms])
    cum = np.cumsum(probs)
    disp = [np.asarray(a) for _, a in law.atoms]
    sizes = np.array([d.size for d in disp])
    return cum, disp, sizes


def _expand_stream(law, positions, rng):
    """(child_positions, parent_index, brood_displacements) for one generation."""
    p = positions.size
    if law.family == "deterministic":
        k = int(law.count_param)
        disp = law.displacement.sample(rng, k * p).reshape(p, k)
        children = (positions[:, None] + disp).ravel()
        parent_index = np.repeat(np.arange(p), k)
        return children, parent_index, disp.ravel()
    if law.family == "poisson":
        counts = rng.poisson(law.count_param, p)
        parent_index = np.repeat(np.arange(p), counts)
        disp = law.displacement.sample(rng, int(counts.sum()))
        return positions[parent_index] + disp, parent_index, disp
    cum, atom_disp, sizes = _atom_tables(law)
    outcome = np.minimum(np.searchsorted(cum, rng.random(p), side="right"), len(cum) - 1)
    counts = sizes[outcome]
    parent_index = np.repeat(np.arange(p), counts)
    disp = np.concatenate([atom_disp[j] for j in outcome]) if p else np.empty(0)
    return positions[parent_index] + disp, parent_index, disp


def _lineage_displacements(law, lrng, generation, slots):
    d = law.displacement
    if isinstance(d, Gaussian):
        return d.mean + math.sqrt(d.variance) * lrng.gaussian(generation, slots)
    u = lrng.uniform(generation, slots, rngmod.DISPLACEMENT)
    if isinstance(d, Laplace):
        x = np.empty(u.shape)
        left = u < 0.5
        x[left] = np.log(2.0 * u[left])
        x[~left] = -np.log(2.0 * (1.0 - u[~left]))
        return x
    if isinstance(d, PointMasses):
        c = np.cumsum(np.asarray(d.probs, float))
        idx = np.minimum(np.searchsorted(c, u, side="right"), len(c) - 1)
        return np.asarray(d.values, float)[idx]
    raise LawValidationError(f"unsupported displacement {d!r}")


def _expand_lineage(law, positions, slots, lrng, generation):
    """Lineage-mode expansion; draws keyed by (generation, lineage slot)."""
    p = positions.size
    if law.family == "finite_atomic":
        cum, atom_disp, sizes = _atom_tables(law)
        u = lrng.uniform(generation, slots, rngmod.OUTCOME)
        outcome = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        counts = sizes[outcome]
        parent_index = np.repeat(np.arange(p), counts)
        disp = np.concatenate([atom_disp[j] for j in outcome]) if p else np.empty(0)
        brood_rank = _within_brood_rank(counts)
        child_slot = rngmod.child_slots(slots[parent_index], brood_rank)
        return positions[parent_index] + disp, parent_index, disp, child_slot
    if law.family == "deterministic":
        k = int(law.count_param)
        counts = np.full(p, k, dtype=np.int64)
    else:
        counts = lrng.poisson(generation, slots, law.count_param)
    parent_index = np.repeat(np.arange(p), counts)
    brood_rank = _within_brood_rank(counts)
    child_slot = rngmod.child_slots(slots[parent_index], brood_rank)
    disp = _lineage_displacements(law, lrng, generation, child_slot)
    return positions[parent_index] + disp, parent_index, disp, child_slot


def _within_brood_rank(counts):
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - starts


def _brood_log_weights(theta, disp, parent_index, p, fixed_count=None):
    """log sum over each brood of exp(theta * displacement)."""
    w = np.exp(theta * disp)
    if fixed_count is not None:
        sums = w.reshape(p, fixed_count).sum(axis=1)
    else:
        sums = np.zeros(p)
        np.add.at(sums, parent_index, w)
    with np.errstate(divide="ignore"):
        return np.log(sums)


# ---------------------------------------------------------------------------
# the simulation loop
# ---------------------------------------------------------------------------

def simulate(plan: SimulationPlan) -> SimulationResult:
    """Run one replicate to its horizon.

    Identical plans (including master_seed and replicate) produce bit-identical
    snapshots; no state outside the plan enters the run.
    """
    lineage = plan.rng_mode == "lineage"
    if lineage:
        lrng = rngmod.LineageRng(plan.master_seed, plan.replicate)
        slots = np.array([rngmod.ROOT_SLOT], dtype=np.uint64)
        stream = None
    else:
        stream = rngmod.replicate_stream(plan.master_seed, 0, plan.replicate)
        slots = None

    positions = np.zeros(1)
    ann = plan.annotations
    if ann is not None:
        exc_path = np.full(1, -np.inf)
        exc_sib = np.full(1, -np.inf)
    pruned = False
    summaries = []

    for child_gen in range(1, plan.n + 1):
        law = plan.law_for_child_generation(child_gen)
        if lineage:
            children, parent_index, disp, slots = _expand_lineage(
                law, positions, slots, lrng, child_gen
            )
        else:
            children, parent_index, disp = _expand_stream(law, positions, stream)
        if children.size > plan.memory_budget:
            raise BudgetExceededError(
                f"{children.size} particles at generation {child_gen} exceed "
                f"the budget of {plan.memory_budget}"
            )
        if children.size == 0:
            positions = children
            summaries.append(GenerationSummary(child_gen, 0, math.nan, math.nan))
            break

        if ann is not None:
            parents = positions.size
            fixed = int(law.count_param) if law.family == "deterministic" else None
            brood = _brood_log_weights(ann.theta, disp, parent_index, parents, fixed)
            # sibling-control event indexes the parent generation k = child_gen-1
            exc_sib = np.maximum(exc_sib, brood - ann.a * child_gen)[parent_index]
            line = children - (ann.kappa_prime + ann.L) * child_gen
            exc_path = np.maximum(exc_path[parent_index], line)

        keep = None
        if isinstance(plan.pruning, Window):
            w = plan.pruning.width_for(child_gen, plan.split_generation())
            keep = children >= children.max() - w
        elif isinstance(plan.pruning, TopK) and children.size > plan.pruning.k:
            keep = np.zeros(children.size, dtype=bool)
            keep[np.argpartition(-children, plan.pruning.k - 1)[: plan.pruning.k]] = True
        if keep is not None and not keep.all():
            pruned = True
            children = children[keep]
            if lineage:
                slots = slots[keep]
            if ann is not None:
                exc_path = exc_path[keep]
                exc_sib = exc_sib[keep]

        positions = children
        summaries.append(
            GenerationSummary(child_gen, positions.size,
                              float(positions.max()), float(positions.min()))
        )

    annotations = None
    if ann is not None and positions.size:
        annotations = TrajectoryAnnotations(ann, exc_path, exc_sib)
    final = PopulationSnapshot(
        generation=summaries[-1].generation if summaries else 0,
        positions=positions,
        annotations=annotations,
        pruned_mass_flag=pruned,
    )
    return SimulationResult(final, tuple(summaries))


def max_of(snapshot: PopulationSnapshot) -> float:
    """The maximal displacement of the snapshot's generation."""
    if snapshot.positions.size == 0:
        raise ValueError("empty snapshot has no maximum")
    return float(snapshot.positions.max())


def extremal_points(snapshot: PopulationSnapshot, m_n: float, cutoff: float) -> PointSample:
    """Centered positions V - m_n at or above the cutoff, sorted non-increasing."""
    if not math.isfinite(cutoff):
        raise ValueError(f"cutoff must be finite, got {cutoff}")
    centered = snapshot.positions - m_n
    pts = np.sort(centered[centered >= cutoff], kind="stable")[::-1]
    origin = ExtremalProcessOrigin(m_n=m_n, cutoff=cutoff, population=snapshot.positions.size)
    return PointSample(points=pts, origin=origin)
