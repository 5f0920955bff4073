"""Seeded Bernoulli thinning of dyadic generations and survivor-set checks.

Each generation-j cube survives independently with probability
2^(-j*d*(1-eta)).  Instead of materializing 2^(j*d) Bernoulli marks, we draw
the survivor count N ~ Binomial(2^(j*d), p) and then N distinct uniform
positions; by exchangeability of i.i.d. marks given their sum this has exactly
the same joint law, and memory drops to the expected 2^(j*d*eta) survivors.

Randomness comes from a counter-based generator (Philox) keyed by (seed,
generation), so the output for a given (seed, j) never depends on call order
or thread schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dyadic import MAX_TREE_BITS, SUPPORTED_DIMS, DyadicIndex, deinterleave

# Hard cap on materialized survivors (and on dense enumerations for eta=1).
MAX_SURVIVORS = 1 << 27

_MASK64 = (1 << 64) - 1


def epsilon_j(j: int, scale: float = 2.0) -> float:
    """Default margin sequence scale*log2(j+2)/j: positive, ->0, j*eps -> inf."""
    if j < 1:
        raise ValueError("epsilon schedule needs j >= 1")
    return scale * math.log2(j + 2) / j


@dataclass(frozen=True)
class EpsilonSchedule:
    """Margin sequence used by the covering check and the depth heuristics."""

    scale: float = 2.0

    def __call__(self, j: int) -> float:
        return epsilon_j(j, self.scale)


@dataclass(frozen=True)
class SamplingConfig:
    eta: float
    seed: int
    d: int = 1

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.d not in SUPPORTED_DIMS:
            raise ValueError(f"dimension must be in {SUPPORTED_DIMS}")


@dataclass(frozen=True)
class SurvivorSet:
    """Sorted, duplicate-free surviving cubes of one generation."""

    generation: int
    d: int
    paths: np.ndarray  # sorted int64 path indices

    def __len__(self) -> int:
        return len(self.paths)

    @cached_property
    def coords(self) -> np.ndarray:
        """(N, d) coordinate array, lexicographically sorted."""
        return deinterleave(self.paths, self.generation, self.d)


def survival_probability(config: SamplingConfig, j: int) -> float:
    return 2.0 ** (-j * config.d * (1.0 - config.eta))


def _generator(config: SamplingConfig, j: int) -> np.random.Generator:
    key = [config.seed & _MASK64, j & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


def survivors(config: SamplingConfig, j: int) -> SurvivorSet:
    """Surviving generation-j cubes; deterministic function of (seed, j)."""
    if j < 0:
        raise ValueError("generation must be >= 0")
    if config.d * j > MAX_TREE_BITS:
        raise ValueError(f"2^(j*d) with j*d = {config.d * j} overflows the index type")
    n_cubes = 1 << (config.d * j)
    p = survival_probability(config, j)
    if p >= 1.0:
        if n_cubes > MAX_SURVIVORS:
            raise ValueError("eta = 1 would materialize the full generation")
        return SurvivorSet(j, config.d, np.arange(n_cubes, dtype=np.int64))
    rng = _generator(config, j)
    count = int(rng.binomial(n_cubes, p))
    if count > MAX_SURVIVORS:
        raise ValueError(f"survivor count {count} exceeds cap {MAX_SURVIVORS}")
    chosen = np.empty(0, dtype=np.int64)
    while len(chosen) < count:
        draw = rng.integers(0, n_cubes, size=count - len(chosen), dtype=np.int64)
        chosen = np.unique(np.concatenate([chosen, draw]))
    return SurvivorSet(j, config.d, chosen)


def survivors_in(cube: DyadicIndex, sset: SurvivorSet) -> np.ndarray:
    """Coordinates of the survivors lying inside `cube` (binary search)."""
    if cube.generation > sset.generation:
        raise ValueError("cube generation exceeds survivor generation")
    if cube.d != sset.d:
        raise ValueError("dimension mismatch")
    shift = sset.d * (sset.generation - cube.generation)
    base = cube.path_index()
    lo = np.searchsorted(sset.paths, base << shift, side="left")
    hi = np.searchsorted(sset.paths, (base + 1) << shift, side="left")
    return deinterleave(sset.paths[lo:hi], sset.generation, sset.d)


class SurvivorCache:
    """Per-generation memo of survivor sets for one sampling configuration."""

    def __init__(self, config: SamplingConfig):
        self.config = config
        self._levels: dict[int, SurvivorSet] = {}

    def level(self, j: int) -> SurvivorSet:
        if j not in self._levels:
            self._levels[j] = survivors(self.config, j)
        return self._levels[j]


# ---------------------------------------------------------------------------
# distribution checks for the survivor lemmas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoveringReport:
    """Fraction of coarse cells at generation m = floor(j*(eta-eps_j)) that
    contain at least one generation-j survivor."""

    j: int
    m: int
    n_cells: int
    n_covered: int

    @property
    def fraction(self) -> float:
        return self.n_covered / self.n_cells

    @property
    def complete(self) -> bool:
        return self.n_covered == self.n_cells


@dataclass(frozen=True)
class CrowdingReport:
    """Largest survivor count over the cells at generation floor(eta*j),
    together with the j bound it is checked against."""

    j: int
    m: int
    max_count: int
    bound: int

    @property
    def ok(self) -> bool:
        return self.max_count <= self.bound


def check_covering(config: SamplingConfig, j: int,
                   epsilon: EpsilonSchedule = EpsilonSchedule()) -> CoveringReport:
    if j < 2:
        raise ValueError("covering check needs j >= 2")
    # eps_j can exceed eta at small j; the coarse generation clamps at the root.
    m = max(0, math.floor(j * (config.eta - epsilon(j))))
    sset = survivors(config, j)
    anc = sset.paths >> (config.d * (j - m))
    n_covered = len(np.unique(anc))
    return CoveringReport(j=j, m=m, n_cells=1 << (config.d * m), n_covered=n_covered)


def check_crowding(config: SamplingConfig, j: int) -> CrowdingReport:
    if j < 2:
        raise ValueError("crowding check needs j >= 2")
    m = math.floor(config.eta * j)
    sset = survivors(config, j)
    anc = sset.paths >> (config.d * (j - m))
    if len(anc) == 0:
        max_count = 0
    else:
        _, counts = np.unique(anc, return_counts=True)
        max_count = int(counts.max())
    return CrowdingReport(j=j, m=m, max_count=max_count, bound=j)
