"""Indexing and neighborhood geometry of dyadic cubes of [0,1]^d, d in {1,2}.

A cube of generation j is identified either by its d coordinate indices in
[0, 2^j), or by its *path index*: the integer whose base-2^d digits are the
child symbols along the root-to-cube path.  For d=1 the path index equals the
coordinate; for d=2 it is the bit-interleave (Morton code) of the two
coordinates, so ancestors are right-shifts and the descendants of a cube form
a contiguous index range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# d * generation must stay below this so path indices fit in int64.
MAX_TREE_BITS = 62

SUPPORTED_DIMS = (1, 2)


@dataclass(frozen=True)
class DyadicIndex:
    """One dyadic cube: generation j plus d coordinates, each in [0, 2^j)."""

    generation: int
    coords: tuple[int, ...]

    def __post_init__(self):
        j = self.generation
        if j < 0:
            raise ValueError(f"generation must be >= 0, got {j}")
        d = len(self.coords)
        if d not in SUPPORTED_DIMS:
            raise ValueError(f"dimension must be in {SUPPORTED_DIMS}, got {d}")
        if d * j > MAX_TREE_BITS:
            raise ValueError(f"d*generation = {d * j} exceeds {MAX_TREE_BITS}")
        for k in self.coords:
            if not 0 <= k < (1 << j):
                raise ValueError(f"coordinate {k} outside [0, 2^{j})")

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> float:
        return 2.0 ** -self.generation

    def path_index(self) -> int:
        return int(interleave(np.array([self.coords], dtype=np.int64),
                              self.generation)[0])


@dataclass(frozen=True)
class NeighborSet:
    """Same-generation cubes whose closures intersect the center's closure."""

    center: DyadicIndex
    members: tuple[DyadicIndex, ...]


def ancestor(idx: DyadicIndex, m: int) -> DyadicIndex:
    """Generation-m cube containing idx (0 <= m <= idx.generation)."""
    j = idx.generation
    if not 0 <= m <= j:
        raise ValueError(f"ancestor generation {m} outside [0, {j}]")
    shift = j - m
    return DyadicIndex(m, tuple(k >> shift for k in idx.coords))


def neighbors(idx: DyadicIndex) -> NeighborSet:
    """All cubes at the same generation within coordinate offset +-1.

    No wraparound: offsets leaving [0, 2^j) are dropped, so boundary cubes
    have fewer than 3^d members.  The center is always a member.
    """
    j = idx.generation
    top = (1 << j) - 1
    ranges = [range(max(0, k - 1), min(top, k + 1) + 1) for k in idx.coords]
    members = []
    if idx.d == 1:
        members = [DyadicIndex(j, (a,)) for a in ranges[0]]
    else:
        members = [DyadicIndex(j, (a, b)) for a in ranges[0] for b in ranges[1]]
    return NeighborSet(center=idx, members=tuple(members))


def index_of_point(x: float | Sequence[float], j: int, d: int | None = None) -> DyadicIndex:
    """Generation-j cube containing the point x of [0,1]^d.

    Coordinates map by floor(x*2^j) clamped to 2^j - 1, so x=1 lands in the
    last cube.  Scaling by 2^j is exact in binary floating point, hence the
    result is consistent across generations.
    """
    xs = (float(x),) if np.isscalar(x) else tuple(float(t) for t in x)
    if d is not None and len(xs) != d:
        raise ValueError(f"point has dimension {len(xs)}, expected {d}")
    for t in xs:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"point coordinate {t} outside [0,1]")
    top = (1 << j) - 1
    coords = tuple(min(int(t * (1 << j)), top) for t in xs)
    return DyadicIndex(j, coords)


# ---------------------------------------------------------------------------
# vectorized path-index helpers
# ---------------------------------------------------------------------------

def interleave(coords: np.ndarray, j: int) -> np.ndarray:
    """Path indices of an (N, d) array of generation-j coordinates."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2:
        raise ValueError("coords must be (N, d)")
    d = coords.shape[1]
    if d == 1:
        return coords[:, 0].copy()
    out = np.zeros(len(coords), dtype=np.int64)
    # symbol at level l: bit_x + 2*bit_y, packed MSB-first
    for level in range(j):
        bitpos = j - 1 - level
        sym = ((coords[:, 0] >> bitpos) & 1) | (((coords[:, 1] >> bitpos) & 1) << 1)
        out |= sym << (d * bitpos)
    return out


def deinterleave(paths: np.ndarray, j: int, d: int) -> np.ndarray:
    """Inverse of interleave: (N,) path indices -> (N, d) coordinates."""
    paths = np.asarray(paths, dtype=np.int64)
    if d == 1:
        return paths.reshape(-1, 1).copy()
    out = np.zeros((len(paths), d), dtype=np.int64)
    for level in range(j):
        bitpos = j - 1 - level
        sym = (paths >> (d * bitpos)) & ((1 << d) - 1)
        out[:, 0] |= (sym & 1) << bitpos
        out[:, 1] |= ((sym >> 1) & 1) << bitpos
    return out


def ancestor_paths(paths: np.ndarray, j: int, m: int, d: int) -> np.ndarray:
    """Generation-m ancestor path indices of generation-j path indices."""
    if not 0 <= m <= j:
        raise ValueError(f"ancestor generation {m} outside [0, {j}]")
    return np.asarray(paths, dtype=np.int64) >> (d * (j - m))


def path_symbols(paths: np.ndarray, j: int, d: int) -> np.ndarray:
    """(N, j) array of base-2^d digits (root-first) of path indices."""
    paths = np.asarray(paths, dtype=np.int64)
    mask = (1 << d) - 1
    out = np.empty((len(paths), j), dtype=np.int64)
    for level in range(j):
        out[:, level] = (paths >> (d * (j - 1 - level))) & mask
    return out
