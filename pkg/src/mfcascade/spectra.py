"""Empirical moment spectra, large-deviation histograms, and conjugation.

Moment sums run over the cubes whose un-maximized value is positive, per the
partition-sum convention; values enter either as the cube's own field value
or as the neighborhood leader.  All reductions are plain numpy sums over
arrays in fixed (path) order, so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dyadic import index_of_point, neighbors
from .cascade import CascadeModel, log2_capacity_paths
from .operators import LeaderField, OperatorParams, floor_scaled, leaders
from .sampling import SamplingConfig, SurvivorCache

_CHUNK = 64  # q-points per block in the conjugation inner loop


@dataclass
class SpectrumCurve:
    """Sampled curve on a strictly increasing grid; -inf marks empty values."""

    abscissae: np.ndarray
    values: np.ndarray
    kind: str  # "tau-of-q" | "sigma-of-H" | "LD-of-H" | "conjugate"
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.abscissae = np.asarray(self.abscissae, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.abscissae.ndim != 1 or self.abscissae.shape != self.values.shape:
            raise ValueError("grid and values must be 1-d and congruent")
        if len(self.abscissae) > 1 and not np.all(np.diff(self.abscissae) > 0):
            raise ValueError("grid must be strictly increasing")

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def value_at(self, x: float, tol: float = 1e-9) -> float:
        i = int(np.argmin(np.abs(self.abscissae - x)))
        if abs(self.abscissae[i] - x) > tol:
            raise KeyError(f"abscissa {x} not on the grid")
        return float(self.values[i])


@dataclass
class LDEstimate:
    """Normalized log-counts of coarse exponents in windows of half-width eps.

    Bins partition the exponent axis into cells of width 2*eps (centers at
    odd multiples of eps), so counts over the bins sum to the number of
    positive cubes.
    """

    level: int
    epsilon: float
    centers: np.ndarray
    counts: np.ndarray
    values: np.ndarray
    use_leaders: bool = False


def _field_values(field: LeaderField, use_leaders: bool) -> tuple[np.ndarray, np.ndarray]:
    mask = field.positive_mask()
    if use_leaders:
        fld = leaders(field) if field.leader_values is None else field
        return fld.leader_values[mask], mask
    return field.values[mask], mask


def empirical_tau(field: LeaderField, q_grid: np.ndarray,
                  use_leaders: bool = False) -> SpectrumCurve:
    """Finite-scale moment exponents -(1/j) log2 sum 2^(q*v).

    v runs over the positive cubes; with use_leaders the summand is the
    neighborhood leader while positivity is still decided by the cube's own
    value.  The sum is a stable log-sum-exp in fixed cube order.
    """
    j = field.level
    if j < 1:
        raise ValueError("need level >= 1")
    q = np.asarray(q_grid, dtype=float)
    v, _ = _field_values(field, use_leaders)
    if len(v) == 0:
        return SpectrumCurve(q, np.full(q.shape, np.inf), "tau-of-q",
                             meta={"level": j, "valid": False})
    out = np.empty(len(q))
    for start in range(0, len(q), _CHUNK):
        qs = q[start:start + _CHUNK, None]
        e = qs * v[None, :]
        m = e.max(axis=1)
        out[start:start + _CHUNK] = m + np.log2(np.sum(np.exp2(e - m[:, None]), axis=1))
    return SpectrumCurve(q, -out / j, "tau-of-q",
                         meta={"level": j, "valid": True,
                               "n_positive": int(len(v)),
                               "use_leaders": use_leaders})


def ld_histogram(field: LeaderField, epsilon: float,
                 use_leaders: bool = False) -> LDEstimate:
    """Bin the coarse exponents -v/j of positive cubes; values log2(count)/j."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    j = field.level
    v, _ = _field_values(field, use_leaders)
    if len(v) == 0:
        return LDEstimate(j, epsilon, np.empty(0), np.empty(0, dtype=np.int64),
                          np.empty(0), use_leaders)
    alpha = -v / j
    k = np.floor(alpha / (2.0 * epsilon)).astype(np.int64)
    k0 = k.min()
    counts = np.bincount(k - k0)
    nz = np.nonzero(counts)[0]
    centers = (nz + k0 + 0.5) * 2.0 * epsilon
    return LDEstimate(j, epsilon, centers, counts[nz].astype(np.int64),
                      np.log2(counts[nz]) / j, use_leaders)


def legendre(curve: SpectrumCurve, out_grid: np.ndarray) -> SpectrumCurve:
    """Pointwise conjugate f*(x) = min over the input grid of (x*q - f(q)).

    Exact for concave piecewise-linear inputs at their kink abscissae.  Where
    the true infimum diverges the grid minimum is reported and flagged via the
    endpoint-attained mask.
    """
    mask = curve.finite_mask()
    if np.count_nonzero(mask) < 2:
        raise ValueError("conjugation needs at least two finite input points")
    q = curve.abscissae[mask]
    f = curve.values[mask]
    x = np.asarray(out_grid, dtype=float)
    vals = np.empty(len(x))
    arg = np.empty(len(x), dtype=np.int64)
    for start in range(0, len(x), _CHUNK):
        xs = x[start:start + _CHUNK, None]
        phi = xs * q[None, :] - f[None, :]
        arg[start:start + _CHUNK] = np.argmin(phi, axis=1)
        vals[start:start + _CHUNK] = phi[np.arange(len(xs)), arg[start:start + _CHUNK]]
    endpoint = (arg == 0) | (arg == len(q) - 1)
    return SpectrumCurve(x, vals, "conjugate",
                         meta={"endpoint_attained": endpoint,
                               "source_kind": curve.kind})


def local_dim_trace(model: CascadeModel, params: OperatorParams,
                    sampling: SamplingConfig | SurvivorCache,
                    x, j_list) -> list[tuple[int, float]]:
    """Coarse local-dimension sequence -leader/j along the cubes containing x.

    Diagnostic only; leaders are evaluated by range queries on the survivor
    lists, without materializing dense levels.
    """
    cache = sampling if isinstance(sampling, SurvivorCache) else SurvivorCache(sampling)
    out = []
    for j in j_list:
        center = index_of_point(x, j, model.d)
        best = -np.inf
        for nb in neighbors(center).members:
            base = nb.path_index()
            for jp in range(j, params.j_sim + 1):
                sset = cache.level(jp)
                if len(sset) == 0:
                    continue
                shift = model.d * (jp - j)
                lo = np.searchsorted(sset.paths, base << shift, side="left")
                hi = np.searchsorted(sset.paths, (base + 1) << shift, side="left")
                if hi == lo:
                    continue
                m = min(jp, floor_scaled(params.rho_eta, jp))
                anc = sset.paths[lo:hi] >> (model.d * (jp - m))
                v = log2_capacity_paths(model, anc, m)
                best = max(best, float(v.max()))
        out.append((j, (-best / j) if np.isfinite(best) else math.inf))
    return out


# ---------------------------------------------------------------------------
# level-dump ingestion (written by the harness with --dump-levels)
# ---------------------------------------------------------------------------

def load_level_dump(path) -> LeaderField:
    """Rebuild a LeaderField from a level-dump CSV (j, coords..., log2_value)."""
    from .dyadic import interleave

    rows = np.genfromtxt(path, delimiter=",", skip_header=1)
    if rows.ndim == 1:
        rows = rows[None, :]
    d = rows.shape[1] - 2
    if d not in (1, 2):
        raise ValueError("level dump must have 1 or 2 coordinate columns")
    levels = np.unique(rows[:, 0].astype(int))
    if len(levels) != 1:
        raise ValueError("level dump must contain a single generation")
    j = int(levels[0])
    coords = rows[:, 1:1 + d].astype(np.int64)
    vals = rows[:, -1]
    dense = np.full(1 << (d * j), -np.inf)
    dense[interleave(coords, j)] = vals
    return LeaderField(level=j, d=d, values=dense, meta={"loaded": True})
