"""Random-number streams.

Two tiers of determinism:

* ``replicate_stream`` gives each (master seed, stream id, replicate) its own
  counter-based Philox generator.  Replicate-level parallelism is therefore
  schedule-independent: results depend only on the replicate index, never on
  which worker ran it or how replicates were chunked.

* ``LineageRng`` provides per-particle counter-based draws keyed by
  (master seed, replicate, generation, lineage slot, purpose, draw index).
  A particle's randomness is a pure function of its lineage, so pruning
  decisions cannot perturb the draws of surviving particles.  This is what
  makes pruned-versus-unpruned oracle comparisons couple path by path.

All hashing is SplitMix64 finalisation over uint64 lanes, vectorised with
numpy; outputs are identical for any thread count by construction.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_PURPOSE_STRIDE = np.uint64(0x632BE59BD9B4E019)

U64 = np.uint64

# purposes: disjoint substreams per particle
COUNT = np.uint64(1)
OUTCOME = np.uint64(2)
DISPLACEMENT = np.uint64(3)
SPINE_CHOICE = np.uint64(4)


def mix64(x):
    """SplitMix64 finaliser over a uint64 scalar or array."""
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def replicate_stream(master_seed: int, stream: int, replicate: int) -> np.random.Generator:
    """Philox generator keyed by (master_seed, stream, replicate)."""
    key = np.array(
        [np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF),
         (np.uint64(stream) << np.uint64(40)) + np.uint64(replicate)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def lineage_key(master_seed: int, replicate: int) -> np.uint64:
    return mix64(mix64(np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF)) ^ np.uint64(replicate))


def child_slots(parent_slots: np.ndarray, child_index: np.ndarray) -> np.ndarray:
    """Deterministic lineage slot of each child from its parent's slot."""
    return mix64(parent_slots ^ ((child_index.astype(np.uint64) + np.uint64(1)) * _GOLDEN))


ROOT_SLOT = mix64(np.uint64(0))


class LineageRng:
    """Counter-based per-particle draws for one replicate."""

    def __init__(self, master_seed: int, replicate: int = 0):
        self.key = lineage_key(master_seed, replicate)

    def _hash(self, generation, slots, purpose, idx):
        with np.errstate(over="ignore"):
            h = mix64(self.key ^ (np.uint64(generation) * _MIX2))
            h = mix64(h ^ np.asarray(slots, dtype=np.uint64))
            h = mix64(h ^ (purpose * _PURPOSE_STRIDE + np.uint64(idx)))
        return h

    def uniform(self, generation, slots, purpose, idx=0):
        """U(0,1] draws, one per slot; 53-bit mantissa."""
        h = self._hash(generation, slots, purpose, idx)
        return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54

    def gaussian(self, generation, slots, purpose=DISPLACEMENT, idx=0):
        """One standard Gaussian per slot via Box-Muller (indices 2*idx, 2*idx+1)."""
        u1 = self.uniform(generation, slots, purpose, 2 * idx)
        u2 = self.uniform(generation, slots, purpose, 2 * idx + 1)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def poisson(self, generation, slots, lam, purpose=COUNT):
        """Poisson(lam) per slot by inverse transform on one uniform each."""
        u = self.uniform(generation, slots, purpose, 0)
        counts = np.zeros(len(u), dtype=np.int64)
        p = np.full(len(u), np.exp(-lam))
        cdf = p.copy()
        unsettled = u > cdf
        k = 0
        # lam is O(10) in practice; the loop runs until every lane settles
        while unsettled.any():
            k += 1
            p = p * (lam / k)
            cdf = cdf + p
            counts[unsettled] = k
            unsettled = u > cdf
            if k > 200:  # guards pathological lam; P(K>200) underflows anyway
                break
        return counts
