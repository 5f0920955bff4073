"""Multinomial multiplicative cascades with closed-form moment spectra.

The cascade assigns to each dyadic cube the product of per-level weights
raised to a power gamma.  Everything is carried in log2 space so values stay
finite down to generation ~60.

Closed forms used throughout:

    tau(q)       = -log2 sum_i w_i^(gamma*q)
    tau'(q)      = sum_i p_i(q) * (-gamma*log2 w_i),  p_i(q) prop. w_i^(gamma*q)
    sigma(H)     = q*H - tau(q)  at the unique q with tau'(q) = H

tau is strictly increasing; for non-equal weights it is strictly concave and
tau' decreases from H_max to H_min, so all solvers below are monotone
bisections.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dyadic import MAX_TREE_BITS, SUPPORTED_DIMS, DyadicIndex, neighbors

WEIGHT_SUM_TOL = 1e-12
# Snap-to-endpoint band for sigma and related inversions.
ENDPOINT_TOL = 1e-12
# Bisection controls (fixed iteration cap, see DESIGN DECISIONS).
BISECT_MAX_ITER = 200
BRACKET_START = 64.0
BRACKET_MAX = 65536.0


@dataclass(frozen=True)
class CascadeModel:
    """Weight vector (2^d entries, positive, summing to 1) plus exponent gamma."""

    d: int
    weights: tuple[float, ...]
    gamma: float = 1.0

    def __post_init__(self):
        if self.d not in SUPPORTED_DIMS:
            raise ValueError(f"dimension must be in {SUPPORTED_DIMS}")
        if len(self.weights) != 1 << self.d:
            raise ValueError(f"need {1 << self.d} weights for d={self.d}")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive (full support)")
        if abs(sum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("weights must sum to 1 within 1e-12")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @cached_property
    def log2_weights(self) -> np.ndarray:
        return np.log2(np.asarray(self.weights, dtype=float))

    @cached_property
    def symbol_exponents(self) -> np.ndarray:
        """Per-symbol exponent increments -gamma*log2 w_i (all positive)."""
        return -self.gamma * self.log2_weights

    @property
    def H_min(self) -> float:
        return float(np.min(self.symbol_exponents))

    @property
    def H_max(self) -> float:
        return float(np.max(self.symbol_exponents))

    @cached_property
    def top_multiplicity(self) -> int:
        w = np.asarray(self.weights)
        return int(np.sum(w >= w.max() * (1 - 1e-12)))

    @cached_property
    def bottom_multiplicity(self) -> int:
        w = np.asarray(self.weights)
        return int(np.sum(w <= w.min() * (1 + 1e-12)))

    @property
    def is_multifractal(self) -> bool:
        """Non-equal weights; equal weights give the monofractal power of volume."""
        return self.H_max - self.H_min > 1e-12

    def tau_prime_at_zero(self) -> float:
        return tau_prime(self, 0.0)


# ---------------------------------------------------------------------------
# closed-form spectra
# ---------------------------------------------------------------------------

def tau(model: CascadeModel, q) -> np.ndarray | float:
    """Moment scaling exponent -log2 sum_i w_i^(gamma*q), stable for large |q|."""
    q = np.asarray(q, dtype=float)
    # exponents of the summands in log2 space
    e = model.gamma * q[..., None] * model.log2_weights
    m = np.max(e, axis=-1)
    s = np.sum(np.exp2(e - m[..., None]), axis=-1)
    out = -(m + np.log2(s))
    return out if out.shape else float(out)


def tau_prime(model: CascadeModel, q) -> np.ndarray | float:
    q = np.asarray(q, dtype=float)
    e = model.gamma * q[..., None] * model.log2_weights
    m = np.max(e, axis=-1)
    p = np.exp2(e - m[..., None])
    p /= np.sum(p, axis=-1, keepdims=True)
    out = np.sum(p * model.symbol_exponents, axis=-1)
    return out if out.shape else float(out)


def _bisect(f, lo, hi, n_iter: int = BISECT_MAX_ITER) -> np.ndarray:
    """Vectorized bisection for f increasing componentwise, roots bracketed."""
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all(hi - lo < 1e-13 * np.maximum(1.0, np.abs(lo))):
            break
    return 0.5 * (lo + hi)


def q_of_tau(model: CascadeModel, t) -> np.ndarray | float:
    """Solve tau(q) = t (tau is an increasing bijection of the line)."""
    t = np.asarray(t, dtype=float)
    b = BRACKET_START
    while b < BRACKET_MAX:
        if np.all(tau(model, -b) < t) and np.all(tau(model, b) > t):
            break
        b *= 2.0
    out = _bisect(lambda q: tau(model, q) - t, np.full(t.shape, -b), np.full(t.shape, b))
    return out if out.shape else float(out)


def q_of_tau_prime(model: CascadeModel, H) -> np.ndarray | float:
    """Solve tau'(q) = H for H in (H_min, H_max); tau' is strictly decreasing."""
    if not model.is_multifractal:
        raise ValueError("tau' is constant for equal weights; no inverse")
    H = np.asarray(H, dtype=float)
    b = BRACKET_START
    while b < BRACKET_MAX:
        if np.all(tau_prime(model, -b) > H) and np.all(tau_prime(model, b) < H):
            break
        b *= 2.0
    # f(q) = H - tau'(q) is increasing in q
    out = _bisect(lambda q: H - tau_prime(model, q),
                  np.full(H.shape, -b), np.full(H.shape, b))
    return out if out.shape else float(out)


def sigma(model: CascadeModel, H) -> np.ndarray | float:
    """Legendre spectrum q*H - tau(q) at tau'(q)=H; -inf outside [H_min, H_max].

    Endpoint values come from symbol multiplicities (log2 of the number of
    maximal/minimal weights), not from a limit.
    """
    H = np.asarray(H, dtype=float)
    scalar = not H.shape
    H = np.atleast_1d(H)
    out = np.full(H.shape, -np.inf)
    lo, hi = model.H_min, model.H_max
    if not model.is_multifractal:
        at = np.abs(H - lo) <= ENDPOINT_TOL * max(1.0, abs(lo))
        out[at] = float(model.d)
    else:
        at_lo = np.abs(H - lo) <= ENDPOINT_TOL * max(1.0, abs(lo))
        at_hi = np.abs(H - hi) <= ENDPOINT_TOL * max(1.0, abs(hi))
        out[at_lo] = np.log2(model.top_multiplicity)
        out[at_hi] = np.log2(model.bottom_multiplicity)
        inner = ~at_lo & ~at_hi & (H > lo) & (H < hi)
        if np.any(inner):
            q = q_of_tau_prime(model, H[inner])
            out[inner] = q * H[inner] - tau(model, np.atleast_1d(q))
    return float(out[0]) if scalar else out


def sigma_inverse_increasing(model: CascadeModel, s) -> np.ndarray | float:
    """H in [H_min, tau'(0)] with sigma(H) = s, on the increasing branch."""
    if not model.is_multifractal:
        raise ValueError("increasing branch undefined for equal weights")
    s = np.asarray(s, dtype=float)
    lo = model.H_min
    hi = tau_prime(model, 0.0)
    s_lo = sigma(model, lo)
    if np.any(s < s_lo - 1e-12) or np.any(s > model.d + 1e-12):
        raise ValueError("level outside [sigma(H_min), d]")
    out = _bisect(lambda H: np.asarray(sigma(model, H)) - s,
                  np.full(s.shape, lo), np.full(s.shape, hi))
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# cube masses
# ---------------------------------------------------------------------------

def log2_capacity(model: CascadeModel, idx: DyadicIndex) -> float:
    """log2 of the cascade mass of one cube: gamma * sum of digit log-weights."""
    if idx.d != model.d:
        raise ValueError("index dimension does not match model")
    return float(log2_capacity_paths(
        model, np.array([idx.path_index()], dtype=np.int64), idx.generation)[0])


def log2_capacity_paths(model: CascadeModel, paths: np.ndarray, j: int) -> np.ndarray:
    """Vectorized log2 cascade mass for generation-j path indices."""
    paths = np.asarray(paths, dtype=np.int64)
    out = np.zeros(len(paths), dtype=float)
    logw = model.gamma * model.log2_weights
    mask = (1 << model.d) - 1
    for level in range(j):
        sym = (paths >> (model.d * (j - 1 - level))) & mask
        out += logw[sym]
    return out


def log2_base_measure_paths(model: CascadeModel, paths: np.ndarray, j: int) -> np.ndarray:
    """Same as log2_capacity_paths but for the gamma=1 base measure."""
    paths = np.asarray(paths, dtype=np.int64)
    out = np.zeros(len(paths), dtype=float)
    mask = (1 << model.d) - 1
    for level in range(j):
        sym = (paths >> (model.d * (j - 1 - level))) & mask
        out += model.log2_weights[sym]
    return out


def log2_capacity_3I(model: CascadeModel, idx: DyadicIndex) -> float:
    """log2 of (base measure of the union of neighboring cubes)^gamma.

    The base measure is additive over same-generation cubes, so this is
    gamma * log2 sum over the neighbor set.
    """
    if idx.d != model.d:
        raise ValueError("index dimension does not match model")
    nb = neighbors(idx)
    paths = np.array([m.path_index() for m in nb.members], dtype=np.int64)
    vals = log2_base_measure_paths(model, paths, idx.generation)
    m = vals.max()
    return float(model.gamma * (m + np.log2(np.sum(np.exp2(vals - m)))))


def cascade_field(model: CascadeModel, j: int) -> np.ndarray:
    """Dense array of log2 masses over all generation-j cubes, in path order."""
    if model.d * j > min(MAX_TREE_BITS, 26):
        raise ValueError(f"dense field at generation {j} too large")
    vals = np.zeros(1, dtype=float)
    logw = model.gamma * model.log2_weights
    for _ in range(j):
        vals = (vals[:, None] + logw[None, :]).ravel()
    return vals
