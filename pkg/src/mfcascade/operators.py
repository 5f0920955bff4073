"""Dilation and sampling composed into leader fields at finite depth.

The analyzed capacity assigns to a cube I of generation j the largest dilated
mass over the surviving cubes inside I:

    field(I) = max over survivors w' with generation j' in [j, J_sim], I_w' in I,
               of log2 mass(ancestor(w', floor(rho*eta*j')))

The sup over all generations >= j is truncated at J_sim; cubes whose truncated
subtree holds no survivor carry the sentinel -inf and are excluded from moment
sums.  The reduction is a plain max over survivors, so any partition of the
survivor lists yields bitwise-identical fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .cascade import CascadeModel, log2_capacity, log2_capacity_paths
from .dyadic import DyadicIndex, ancestor, deinterleave
from .errors import ConfigError
from .sampling import EpsilonSchedule, SamplingConfig, SurvivorCache

# floor() guard against binary round-off in rho*eta*j at exact integers
_FLOOR_EPS = 1e-9

# dense per-level arrays are capped at this many cubes
MAX_DENSE_LEVEL = 1 << 26


def floor_scaled(factor: float, j: int) -> int:
    """floor(factor*j) with a guard for products landing on integers."""
    return int(math.floor(factor * j + _FLOOR_EPS))


@dataclass(frozen=True)
class OperatorParams:
    """Redundancy/sampling exponents plus analysis and truncation depths.

    The sup defining the capacity at level j is almost surely realized by
    survivors of generation at most j/(eta - eps_j); J_sim at least
    ceil(J_analysis/(eta - eps)) keeps the truncation bias negligible.  At
    small depths eps_J can exceed eta, which makes that bound vacuous (any
    J_sim >= J_analysis is accepted) and the default switches to
    ceil(J_analysis/eta) + 4.
    """

    rho: float
    eta: float
    j_analysis: int
    j_sim: int | None = None
    epsilon: EpsilonSchedule = dc_field(default_factory=EpsilonSchedule)

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if not 0.0 < self.rho <= 1.0 / self.eta + 1e-12:
            raise ConfigError("rho must lie in (0, 1/eta]")
        if self.j_analysis < 1:
            raise ConfigError("j_analysis must be >= 1")
        if self.j_sim is None:
            object.__setattr__(self, "j_sim", self.default_j_sim())
        if self.j_sim < self.j_analysis:
            raise ConfigError("j_sim must be >= j_analysis")
        req = self.required_j_sim()
        if self.j_sim < req:
            raise ConfigError(
                f"j_sim = {self.j_sim} below the truncation bound {req}; "
                f"raise depths.j_sim or lower j_analysis")

    def margin(self) -> float:
        return self.eta - self.epsilon(self.j_analysis)

    def required_j_sim(self) -> int:
        """Signed bound ceil(J/(eta-eps)); non-binding when eta <= eps.
        At eta = 1 every cube survives and level J already realizes the sup."""
        if self.eta >= 1.0:
            return self.j_analysis
        m = self.margin()
        if m <= 0.0:
            return self.j_analysis
        return max(self.j_analysis, math.ceil(self.j_analysis / m))

    def default_j_sim(self) -> int:
        if self.eta >= 1.0:
            return self.j_analysis
        m = self.margin()
        if m > 0.0:
            return math.ceil(self.j_analysis / m) + 2
        return math.ceil(self.j_analysis / self.eta) + 4

    @property
    def rho_eta(self) -> float:
        return self.rho * self.eta


@dataclass
class LeaderField:
    """Dense log2-valued level arrays in path-index order.

    `values` is the per-cube field before the neighborhood max (-inf for cubes
    with no survivor in the truncated subtree); `leader_values` is the running
    3^d-window max, filled by `leaders`.
    """

    level: int
    d: int
    values: np.ndarray
    leader_values: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.values)

    def positive_mask(self) -> np.ndarray:
        return self.values > -np.inf


def dilated_capacity(model: CascadeModel, rho_times_eta: float, idx: DyadicIndex) -> float:
    """log2 mass of the generation-floor(rho*eta*j) ancestor of idx."""
    if not 0.0 < rho_times_eta <= 1.0 + 1e-12:
        raise ValueError("dilation factor must lie in (0, 1]")
    m = min(idx.generation, floor_scaled(rho_times_eta, idx.generation))
    return log2_capacity(model, ancestor(idx, m))


def _survivor_values(model: CascadeModel, params: OperatorParams,
                     paths: np.ndarray, jp: int) -> tuple[np.ndarray, int]:
    """Dilated log2 masses of generation-jp survivors, plus the ancestor level."""
    m = min(jp, floor_scaled(params.rho_eta, jp))
    anc = paths >> (model.d * (jp - m))
    return log2_capacity_paths(model, anc, m), m


def mrho_field(model: CascadeModel, params: OperatorParams,
               sampling: SamplingConfig | SurvivorCache, j: int) -> LeaderField:
    """Un-maximized field at level j, reduced over survivor generations
    j..J_sim.  Tracks the shallowest contributing dilation level per cube for
    the truncation diagnostic."""
    if j > params.j_analysis:
        raise ValueError("level exceeds params.j_analysis")
    if j < 1:
        raise ValueError("level must be >= 1")
    cache = sampling if isinstance(sampling, SurvivorCache) else SurvivorCache(sampling)
    if cache.config.d != model.d:
        raise ValueError("sampling dimension does not match model")
    if abs(cache.config.eta - params.eta) > 1e-12:
        raise ValueError("sampling eta does not match operator eta")
    size = 1 << (model.d * j)
    if size > MAX_DENSE_LEVEL:
        raise ValueError(f"dense level of {size} cubes exceeds cap")
    vals = np.full(size, -np.inf)
    min_anc = np.full(size, np.iinfo(np.int32).max, dtype=np.int32)
    for jp in range(j, params.j_sim + 1):
        sset = cache.level(jp)
        if len(sset) == 0:
            continue
        v, m = _survivor_values(model, params, sset.paths, jp)
        owner = sset.paths >> (model.d * (jp - j))
        np.maximum.at(vals, owner, v)
        np.minimum.at(min_anc, owner, m)
    return LeaderField(level=j, d=model.d, values=vals,
                       meta={"min_anc_level": min_anc,
                             "j_sim": params.j_sim,
                             "rho": params.rho, "eta": params.eta})


def leaders(field: LeaderField) -> LeaderField:
    """Fill the per-cube max over the 3^d neighborhood (clamped at the
    boundary; -inf is the identity so clamping via edge replication is safe)."""
    j, d = field.level, field.d
    v = field.values
    if d == 1:
        padded = np.concatenate([[-np.inf], v, [-np.inf]])
        led = np.maximum(np.maximum(padded[:-2], padded[1:-1]), padded[2:])
    else:
        n = 1 << j
        coords = deinterleave(np.arange(len(v), dtype=np.int64), j, d)
        grid = np.full((n, n), -np.inf)
        grid[coords[:, 0], coords[:, 1]] = v
        padded = np.full((n + 2, n + 2), -np.inf)
        padded[1:-1, 1:-1] = grid
        out = np.full((n, n), -np.inf)
        for dx in range(3):
            for dy in range(3):
                np.maximum(out, padded[dx:dx + n, dy:dy + n], out=out)
        led = out[coords[:, 0], coords[:, 1]]
    return LeaderField(level=j, d=d, values=field.values,
                       leader_values=led, meta=dict(field.meta))


def coarsen_field(field: LeaderField, model: CascadeModel, params: OperatorParams,
                  cache: SurvivorCache, j: int) -> LeaderField:
    """Field at a shallower level j from a deeper one: max over children plus
    the survivors of the intermediate generations.  Equals mrho_field(j)."""
    if j >= field.level:
        raise ValueError("coarsen target must be shallower")
    vals = field.values
    min_anc = field.meta["min_anc_level"]
    d = field.d
    for level in range(field.level - 1, j - 1, -1):
        k = 1 << d
        vals = vals.reshape(-1, k).max(axis=1)
        min_anc = min_anc.reshape(-1, k).min(axis=1)
        sset = cache.level(level)
        if len(sset):
            v, m = _survivor_values(model, params, sset.paths, level)
            np.maximum.at(vals, sset.paths, v)
            np.minimum.at(min_anc, sset.paths, np.int32(m))
    return LeaderField(level=j, d=d, values=vals,
                       meta={**field.meta, "min_anc_level": min_anc})


# ---------------------------------------------------------------------------
# truncation diagnostics
# ---------------------------------------------------------------------------

def truncation_unsafe_fraction(field: LeaderField, model: CascadeModel,
                               params: OperatorParams) -> float:
    """Upper bound on the fraction of cubes whose value could change if J_sim
    were raised.

    A positive cube is provably immune when its shallowest contributing
    dilation level m is <= j: its value is then the mass of one of its own
    ancestors, which no deeper survivor can beat (deeper survivors dilate to
    generations > floor(rho*eta*J_sim) >= m, and masses decrease along
    descent).  Otherwise immunity needs
        value >= log2 mass(I) - H_min * (floor(rho*eta*J_sim) - j),
    the best any unseen survivor could contribute.  Empty cubes always count
    as unsafe.
    """
    j = field.level
    pos = field.positive_mask()
    n = field.size
    min_anc = field.meta["min_anc_level"]
    m_sim = floor_scaled(params.rho_eta, params.j_sim)
    unsafe = np.count_nonzero(~pos)
    deep = pos & (min_anc > j)
    if np.any(deep):
        from .cascade import cascade_field
        own = cascade_field(model, j)
        slack = model.H_min * max(0, m_sim - j)
        unsafe += int(np.count_nonzero(field.values[deep] < own[deep] - slack))
    return unsafe / n


def truncation_change_fraction(model: CascadeModel, params: OperatorParams,
                               sampling: SamplingConfig, j: int,
                               factor: int = 2) -> float:
    """Literal re-run with J_sim scaled by `factor`: fraction of level-j cubes
    whose value changes.  Only feasible at small depths."""
    cache = SurvivorCache(sampling)
    base = mrho_field(model, params, cache, j)
    deeper = OperatorParams(rho=params.rho, eta=params.eta,
                            j_analysis=params.j_analysis,
                            j_sim=params.j_sim * factor,
                            epsilon=params.epsilon)
    other = mrho_field(model, deeper, cache, j)
    a, b = base.values, other.values
    changed = np.count_nonzero(~((a == b) | (np.isneginf(a) & np.isneginf(b))))
    return changed / base.size
