"""Closed-form predicted spectra, phase parameters, and independent oracle.

Three regimes for the redundancy exponent rho (sampling exponent eta fixed in
(0,1)):

* rho = 1: spectrum and moment exponents of the analyzed capacity follow the
  base spectrum below the zero-crossing q1 of tau and pick up a factor eta
  above it; the formalism holds everywhere.
* rho < 1: four sub-cases (Case1 / Case2a / Case2b, split by how the level
  d(1-rho)/(1/eta-rho) cuts the increasing branch of sigma) with a linear
  phase of slope q_rho, a reparametrized branch sigma(theta^-1), and a
  formalism-validity set that is a strict subset of the domain.
* rho > 1: two phase transitions, formalism holds everywhere.

Two display-level corrections are applied relative to the narrative source
(recorded in the project notes, verified by the conjugation self-tests): the
third branch of the rho>1 moment exponent is (rho*eta*H1)*q, and the third
spectrum piece is sigma(H - H3); both are forced by continuity and by the
Legendre pairing the same statement asserts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .cascade import (
    CascadeModel,
    q_of_tau,
    q_of_tau_prime,
    sigma,
    sigma_inverse_increasing,
    tau,
    tau_prime,
)
from .spectra import SpectrumCurve, legendre

# classification band for the Case2a/2b frontier (H_{rho,eta} = H_rho)
DEGENERATE_TOL = 1e-10
# default conjugation grid for formalism reports
CONJ_Q_RANGE = (-60.0, 60.0)
CONJ_Q_STEP = 1e-3

CASE_RHO_ONE = "RhoEqualsOne"
CASE_1 = "Case1"
CASE_2A = "Case2a"
CASE_2B = "Case2b"
CASE_RHO_GT_ONE = "RhoGreaterOne"


@dataclass(frozen=True)
class PhaseParams:
    """Solved transition parameters for one (model, rho, eta)."""

    rho: float
    eta: float
    case_tag: str
    uniform: bool
    q1: float
    H1: float
    q_rho: float | None = None
    H_rho: float | None = None
    sigma_H_rho: float | None = None
    theta_H_rho: float | None = None
    H_rho_eta: float | None = None
    threshold: float | None = None
    degenerate_2ab: bool = False
    H1_rho: float | None = None
    H2_rho: float | None = None
    H3_rho: float | None = None
    q2_rho: float | None = None
    q_top: float | None = None  # slope of sigma at H1_rho; None when infinite

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FormalismSet:
    """Subset of the spectrum domain where conjugate and spectrum agree:
    one closed interval (possibly None) plus isolated points."""

    interval: tuple[float, float] | None
    points: tuple[float, ...]

    def contains(self, H: float, slack: float = 0.0) -> bool:
        if self.interval is not None:
            lo, hi = self.interval
            if lo - slack <= H <= hi + slack:
                return True
        return any(abs(H - p) <= slack for p in self.points)

    def to_dict(self) -> dict:
        return {"interval": list(self.interval) if self.interval else None,
                "points": list(self.points)}


@dataclass
class PredictedSpectra:
    sigma: SpectrumCurve
    tau: SpectrumCurve
    breakpoints: list[tuple[str, float]]
    formalism_set: FormalismSet
    params: PhaseParams


# ---------------------------------------------------------------------------
# reparametrization theta and its inverse
# ---------------------------------------------------------------------------

def delta_rho(model: CascadeModel, rho: float, H) -> np.ndarray | float:
    """(d(1-rho) + rho*sigma(H)) / sigma(H) on the increasing branch."""
    s = np.asarray(sigma(model, H), dtype=float)
    return (model.d * (1.0 - rho) + rho * s) / s


def theta_rho(model: CascadeModel, rho: float, H) -> np.ndarray | float:
    """rho*H/delta_rho(H); increases from ~0 (when sigma(H_min)=0) to
    rho*tau'(0) over [H_min, tau'(0)]."""
    H = np.asarray(H, dtype=float)
    s = np.asarray(sigma(model, H), dtype=float)
    out = rho * H * s / (model.d * (1.0 - rho) + rho * s)
    return out if out.shape else float(out)


def theta_rho_inverse(model: CascadeModel, rho: float, t) -> np.ndarray | float:
    """Monotone bisection of theta on [H_min, tau'(0)]."""
    t = np.asarray(t, dtype=float)
    scalar = not t.shape
    t = np.atleast_1d(t)
    lo = np.full(t.shape, model.H_min)
    hi = np.full(t.shape, tau_prime(model, 0.0))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        under = np.asarray(theta_rho(model, rho, mid)) < t
        lo = np.where(under, mid, lo)
        hi = np.where(under, hi, mid)
        if np.all(hi - lo < 1e-14 * np.maximum(1.0, np.abs(hi))):
            break
    out = 0.5 * (lo + hi)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# phase-parameter solving and case classification
# ---------------------------------------------------------------------------

def solve_phase_params(model: CascadeModel, rho: float, eta: float) -> PhaseParams:
    """Solve every transition parameter applicable to (rho, eta) and classify.

    Equal-weight models are admitted only at rho = 1/eta (power-of-volume
    family); anything else needs a multifractal cascade.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    if not 0.0 < rho <= 1.0 / eta + 1e-12:
        raise ValueError("rho must lie in (0, 1/eta]")
    d = float(model.d)
    if not model.is_multifractal:
        if abs(rho - 1.0 / eta) > 1e-9:
            raise ValueError(
                "spectrum formulas require a multifractal cascade "
                "(non-equal weights) unless rho = 1/eta")
        g = model.gamma
        return PhaseParams(rho=rho, eta=eta, case_tag=CASE_RHO_GT_ONE, uniform=True,
                           q1=1.0 / g, H1=d * g)

    q1 = 1.0 / model.gamma  # tau(1/gamma) = -log2 sum w_i = 0 exactly
    H1 = float(tau_prime(model, q1))

    if abs(rho - 1.0) <= 1e-12:
        return PhaseParams(rho=rho, eta=eta, case_tag=CASE_RHO_ONE, uniform=False,
                           q1=q1, H1=H1, q_rho=q1, H_rho=H1,
                           sigma_H_rho=float(sigma(model, H1)))

    # q_rho solves tau(q) = d(1-rho)/rho (negative level for rho > 1)
    level = d * (1.0 - rho) / rho
    q_rho = float(q_of_tau(model, level))
    H_rho = float(tau_prime(model, q_rho))
    sig_H_rho = float(sigma(model, H_rho))

    if rho > 1.0 + 1e-12:
        # tangency point of sigma seen from (0, d(1-1/rho)) is the same q_rho
        level1 = d * (1.0 - 1.0 / rho)
        H3 = -level / q_rho  # = d(rho-1)/(rho*q_rho) > 0
        s_min = float(sigma(model, model.H_min))
        if s_min >= level1 - 1e-15:
            H1_rho = model.H_min
            q_top = None  # sigma'(H_min) = +inf
        else:
            H1_rho = float(sigma_inverse_increasing(model, level1))
            q_top = float(q_of_tau_prime(model, H1_rho))
        return PhaseParams(rho=rho, eta=eta, case_tag=CASE_RHO_GT_ONE, uniform=False,
                           q1=q1, H1=H1, q_rho=q_rho, H_rho=H_rho,
                           sigma_H_rho=sig_H_rho,
                           H1_rho=H1_rho, H2_rho=H_rho, H3_rho=H3, q2_rho=q_rho,
                           q_top=q_top)

    # rho < 1
    threshold = d * (1.0 - rho) / (1.0 / eta - rho)
    th_H_rho = float(theta_rho(model, rho, H_rho))
    s_min = float(sigma(model, model.H_min))
    if s_min > threshold + DEGENERATE_TOL:
        return PhaseParams(rho=rho, eta=eta, case_tag=CASE_1, uniform=False,
                           q1=q1, H1=H1, q_rho=q_rho, H_rho=H_rho,
                           sigma_H_rho=sig_H_rho, theta_H_rho=th_H_rho,
                           threshold=threshold)
    H_rho_eta = float(sigma_inverse_increasing(model, threshold))
    gap = sig_H_rho - threshold
    degenerate = abs(gap) <= DEGENERATE_TOL
    if gap > DEGENERATE_TOL:
        case = CASE_2A  # H_{rho,eta} < H_rho
    else:
        case = CASE_2B
    return PhaseParams(rho=rho, eta=eta, case_tag=case, uniform=False,
                       q1=q1, H1=H1, q_rho=q_rho, H_rho=H_rho,
                       sigma_H_rho=sig_H_rho, theta_H_rho=th_H_rho,
                       H_rho_eta=H_rho_eta, threshold=threshold,
                       degenerate_2ab=degenerate)


# ---------------------------------------------------------------------------
# predicted curves
# ---------------------------------------------------------------------------

def _sigma_pieces(model: CascadeModel, params: PhaseParams):
    """(lo, hi, vectorized formula) pieces of the predicted spectrum, plus the
    labelled breakpoints."""
    d = float(model.d)
    rho, eta = params.rho, params.eta
    re = rho * eta
    tp0 = float(tau_prime(model, 0.0)) if model.is_multifractal else d * model.gamma
    Hmin, Hmax = model.H_min, model.H_max

    if params.uniform:
        g = model.gamma
        pieces = [(d * g, d * g / eta, lambda H: eta * H / g)]
        brk = [("H_typ_min", d * g), ("H_typ_max", d * g / eta)]
        return pieces, brk

    if params.case_tag == CASE_RHO_ONE:
        q1, H1 = params.q1, params.H1
        pieces = [
            (eta * Hmin, eta * H1, lambda H: eta * np.asarray(sigma(model, H / eta))),
            (eta * H1, H1, lambda H: q1 * np.asarray(H)),
            (H1, Hmax, lambda H: np.asarray(sigma(model, H))),
        ]
        brk = [("eta*H_min", eta * Hmin), ("eta*H1", eta * H1),
               ("H1", H1), ("H_max", Hmax)]
        return pieces, brk

    if params.case_tag == CASE_RHO_GT_ONE:
        H1r, H2, H3, q2 = params.H1_rho, params.H2_rho, params.H3_rho, params.q2_rho
        pieces = [
            (re * H1r, re * H2,
             lambda H: re * np.asarray(sigma(model, np.asarray(H) / re)) - d * (rho - 1.0) * eta),
            (re * H2, H2 + H3, lambda H: q2 * np.asarray(H)),
            (H2 + H3, Hmax + H3, lambda H: np.asarray(sigma(model, np.asarray(H) - H3))),
        ]
        brk = [("rho*eta*H1_rho", re * H1r), ("rho*eta*H2_rho", re * H2),
               ("H2_rho+H3_rho", H2 + H3), ("H_max+H3_rho", Hmax + H3)]
        return pieces, brk

    # rho < 1
    q_rho, H_rho, th = params.q_rho, params.H_rho, params.theta_H_rho
    rtp0 = rho * tp0

    def p_sample(H):  # sigma(H/(rho*eta))
        return np.asarray(sigma(model, np.asarray(H) / re))

    def p_redundant(H):  # eta*(d(1-rho) + rho*sigma(H/(rho*eta)))
        return eta * (d * (1.0 - rho) + rho * np.asarray(sigma(model, np.asarray(H) / re)))

    def p_linear(H):
        return q_rho * np.asarray(H)

    def p_theta(H):  # sigma(theta^-1(H))
        u = theta_rho_inverse(model, rho, np.asarray(H))
        return np.asarray(sigma(model, u))

    def p_dilate(H):  # sigma(H/rho)
        return np.asarray(sigma(model, np.asarray(H) / rho))

    if params.case_tag == CASE_1:
        pieces = [
            (re * Hmin, re * H_rho, p_redundant),
            (re * H_rho, th, p_linear),
            (th, rtp0, p_theta),
            (rtp0, rho * Hmax, p_dilate),
        ]
        brk = [("rho*eta*H_min", re * Hmin), ("rho*eta*H_rho", re * H_rho),
               ("theta(H_rho)", th), ("rho*tau'(0)", rtp0), ("rho*H_max", rho * Hmax)]
    elif params.case_tag == CASE_2A:
        Hre = params.H_rho_eta
        pieces = [
            (re * Hmin, re * Hre, p_sample),
            (re * Hre, re * H_rho, p_redundant),
            (re * H_rho, th, p_linear),
            (th, rtp0, p_theta),
            (rtp0, rho * Hmax, p_dilate),
        ]
        brk = [("rho*eta*H_min", re * Hmin), ("rho*eta*H_rho_eta", re * Hre),
               ("rho*eta*H_rho", re * H_rho), ("theta(H_rho)", th),
               ("rho*tau'(0)", rtp0), ("rho*H_max", rho * Hmax)]
    else:  # CASE_2B
        Hre = params.H_rho_eta
        pieces = [
            (re * Hmin, re * Hre, p_sample),
            (re * Hre, rtp0, p_theta),
            (rtp0, rho * Hmax, p_dilate),
        ]
        brk = [("rho*eta*H_min", re * Hmin), ("rho*eta*H_rho_eta", re * Hre),
               ("rho*tau'(0)", rtp0), ("rho*H_max", rho * Hmax)]
    return pieces, brk


def predicted_sigma(model: CascadeModel, rho: float, eta: float,
                    params: PhaseParams, H_grid: np.ndarray) -> SpectrumCurve:
    """Piecewise closed-form spectrum on H_grid with breakpoints inserted
    exactly; -inf outside the domain."""
    _check_params(params, rho, eta)
    pieces, brk = _sigma_pieces(model, params)
    lo_dom, hi_dom = pieces[0][0], pieces[-1][1]
    grid = np.union1d(np.asarray(H_grid, dtype=float),
                      np.array([b for _, b in brk]))
    vals = np.full(grid.shape, -np.inf)
    for k, (lo, hi, fn) in enumerate(pieces):
        last = k == len(pieces) - 1
        sel = (grid >= lo - 1e-12) & ((grid <= hi + 1e-12) if last else (grid < hi))
        if np.any(sel):
            vals[sel] = fn(grid[sel])
    outside = (grid < lo_dom - 1e-12) | (grid > hi_dom + 1e-12)
    vals[outside] = -np.inf
    meta = {"domain": (lo_dom, hi_dom), "breakpoints": brk,
            "case": params.case_tag}
    if H_grid.min() > lo_dom or H_grid.max() < hi_dom:
        meta["truncated"] = True
        warnings.warn(f"H grid [{H_grid.min():g}, {H_grid.max():g}] does not "
                      f"cover the spectrum domain [{lo_dom:g}, {hi_dom:g}]",
                      stacklevel=2)
    return SpectrumCurve(grid, vals, "sigma-of-H", meta=meta)


def predicted_tau(model: CascadeModel, rho: float, eta: float,
                  params: PhaseParams, q_grid: np.ndarray) -> SpectrumCurve:
    """Closed-form moment exponents with the kink abscissae inserted exactly."""
    _check_params(params, rho, eta)
    d = float(model.d)
    q = np.asarray(q_grid, dtype=float)

    if params.uniform:
        g = model.gamma
        kink = eta / g
        grid = np.union1d(q, [kink])
        low = (d * g / eta) * grid - d
        high = d * g * grid - eta * d
        vals = np.where(grid < kink, low, high)
        return SpectrumCurve(grid, vals, "tau-of-q",
                             meta={"kinks": [kink], "case": params.case_tag})

    if params.case_tag == CASE_RHO_ONE:
        kink = params.q1
        grid = np.union1d(q, [kink])
        base = np.asarray(tau(model, grid))
        vals = np.where(grid < kink, base, eta * base)
        return SpectrumCurve(grid, vals, "tau-of-q",
                             meta={"kinks": [kink], "case": params.case_tag})

    if params.case_tag == CASE_RHO_GT_ONE:
        q2, H3, H1r = params.q2_rho, params.H3_rho, params.H1_rho
        kinks = [q2] + ([params.q_top] if params.q_top is not None else [])
        grid = np.union1d(q, kinks)
        base = np.asarray(tau(model, grid))
        mid = rho * eta * base + d * (rho - 1.0) * eta
        vals = np.where(grid <= q2, base + H3 * grid, mid)
        if params.q_top is not None:
            vals = np.where(grid >= params.q_top, rho * eta * H1r * grid, vals)
        return SpectrumCurve(grid, vals, "tau-of-q",
                             meta={"kinks": kinks, "case": params.case_tag})

    kink = params.q_rho
    grid = np.union1d(q, [kink])
    base = d * (rho - 1.0) + rho * np.asarray(tau(model, grid))
    vals = np.where(grid < kink, base, eta * base)
    return SpectrumCurve(grid, vals, "tau-of-q",
                         meta={"kinks": [kink], "case": params.case_tag})


def formalism_set(model: CascadeModel, params: PhaseParams) -> FormalismSet:
    """Where conjugate and spectrum are predicted to agree."""
    pieces, _ = _sigma_pieces(model, params)
    lo_dom, hi_dom = pieces[0][0], pieces[-1][1]
    rho, eta = params.rho, params.eta
    if params.uniform or params.case_tag in (CASE_RHO_ONE, CASE_RHO_GT_ONE):
        return FormalismSet(interval=(lo_dom, hi_dom), points=())
    rtp0 = rho * float(tau_prime(model, 0.0))
    if params.case_tag == CASE_1:
        return FormalismSet(interval=(lo_dom, params.theta_H_rho), points=(rtp0,))
    if params.case_tag == CASE_2A:
        return FormalismSet(interval=(rho * eta * params.H_rho_eta, params.theta_H_rho),
                            points=(rtp0,))
    if params.degenerate_2ab:
        return FormalismSet(interval=None,
                            points=(rho * eta * params.H_rho_eta, rtp0))
    return FormalismSet(interval=None, points=(rtp0,))


def breakpoint_continuity(model: CascadeModel, params: PhaseParams) -> float:
    """Largest mismatch between adjacent piece formulas evaluated at their
    shared breakpoint (should be ~0: the spectrum is continuous)."""
    pieces, _ = _sigma_pieces(model, params)
    worst = 0.0
    for (lo1, hi1, f1), (lo2, hi2, f2) in zip(pieces, pieces[1:]):
        b = np.array([hi1])
        worst = max(worst, float(abs(f1(b)[0] - f2(b)[0])))
    return worst


def one_sided_slopes(model: CascadeModel, params: PhaseParams,
                     H: float, h: float = 1e-7) -> tuple[float, float]:
    """Finite-difference one-sided slopes of the predicted spectrum at H."""
    pieces, _ = _sigma_pieces(model, params)

    def value(x: float) -> float:
        for k, (lo, hi, fn) in enumerate(pieces):
            last = k == len(pieces) - 1
            if lo - 1e-12 <= x and (x <= hi + 1e-12 if last else x < hi):
                return float(fn(np.array([x]))[0])
        return -np.inf

    v0 = value(H)
    return ((v0 - value(H - h)) / h, (value(H + h) - v0) / h)


def predicted_spectra(model: CascadeModel, rho: float, eta: float,
                      H_grid: np.ndarray, q_grid: np.ndarray) -> PredictedSpectra:
    params = solve_phase_params(model, rho, eta)
    sig = predicted_sigma(model, rho, eta, params, H_grid)
    tl = predicted_tau(model, rho, eta, params, q_grid)
    return PredictedSpectra(sigma=sig, tau=tl,
                            breakpoints=sig.meta["breakpoints"],
                            formalism_set=formalism_set(model, params),
                            params=params)


def _check_params(params: PhaseParams, rho: float, eta: float) -> None:
    if abs(params.rho - rho) > 1e-12 or abs(params.eta - eta) > 1e-12:
        raise ValueError("params were solved for different (rho, eta)")


# ---------------------------------------------------------------------------
# variational oracle
# ---------------------------------------------------------------------------

def m_rho(model: CascadeModel, rho: float, u, delta) -> np.ndarray:
    """min((d(1-rho) + rho*sigma(u))/delta, sigma(u))."""
    s = np.asarray(sigma(model, u), dtype=float)
    a = model.d * (1.0 - rho) + rho * s
    return np.minimum(a / np.asarray(delta, dtype=float), s)


class OracleTable:
    """Brute-force table for the constrained max of m_rho over a (u, delta)
    grid: all grid pairs are scored once, sorted by their activation abscissa
    rho*u/delta, and queried by running maximum.

    The u axis mixes a uniform grid with points equidistributed in sigma along
    both branches (grid_density points in total), which keeps the grid error
    controlled where sigma is steep; delta is uniform on [1, 1/eta].
    """

    def __init__(self, model: CascadeModel, rho: float, eta: float,
                 grid_density: int = 2001):
        if not rho < 1.0:
            raise ValueError("oracle applies to rho < 1")
        if grid_density < 16:
            raise ValueError("grid density too small")
        self.model, self.rho, self.eta = model, rho, eta
        self.H_cap = rho * float(tau_prime(model, 0.0))
        u = _oracle_u_grid(model, grid_density)
        delta = np.linspace(1.0, 1.0 / eta, grid_density)
        s = np.asarray(sigma(model, u))
        a = model.d * (1.0 - rho) + rho * s
        m = np.minimum(a[:, None] / delta[None, :], s[:, None]).ravel()
        t = (rho * u[:, None] / delta[None, :]).ravel()
        order = np.argsort(t, kind="stable")
        self.t = t[order]
        self.m_cummax = np.maximum.accumulate(m[order])

    def query(self, H) -> np.ndarray | float:
        H = np.asarray(H, dtype=float)
        idx = np.searchsorted(self.t, H + 1e-12, side="right") - 1
        out = np.where(idx >= 0, self.m_cummax[np.maximum(idx, 0)], -np.inf)
        return out if out.shape else float(out)


def _oracle_u_grid(model: CascadeModel, n: int) -> np.ndarray:
    tp0 = float(tau_prime(model, 0.0))
    k = max(4, n // 3)
    uniform = np.linspace(model.H_min, model.H_max, n - 2 * k)
    s_lo = float(sigma(model, model.H_min))
    s_hi = float(sigma(model, model.H_max))
    up = sigma_inverse_increasing(model, np.linspace(s_lo, model.d, k))
    # decreasing branch: solve sigma(H)=s for H in [tau'(0), H_max]
    levels = np.linspace(model.d, s_hi, k)
    lo = np.full(k, tp0)
    hi = np.full(k, model.H_max)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        over = np.asarray(sigma(model, mid)) > levels
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    down = 0.5 * (lo + hi)
    return np.unique(np.concatenate([uniform, up, down, [tp0, model.H_min, model.H_max]]))


def oracle_D_tilde(model: CascadeModel, rho: float, eta: float, H: float,
                   grid_density: int = 2001) -> float:
    """Constrained grid max of m_rho at one H in [0, rho*tau'(0)]."""
    table = OracleTable(model, rho, eta, grid_density)
    if not 0.0 <= H <= table.H_cap + 1e-9:
        raise ValueError("H outside [0, rho*tau'(0)]")
    return float(table.query(H))


def oracle_curve(model: CascadeModel, rho: float, eta: float,
                 H_grid: np.ndarray, grid_density: int = 2001) -> SpectrumCurve:
    table = OracleTable(model, rho, eta, grid_density)
    H = np.asarray(H_grid, dtype=float)
    if np.any(H < -1e-12) or np.any(H > table.H_cap + 1e-9):
        raise ValueError("H grid outside [0, rho*tau'(0)]")
    return SpectrumCurve(H, np.asarray(table.query(H)), "sigma-of-H",
                         meta={"oracle": True, "grid_density": grid_density})


# ---------------------------------------------------------------------------
# conjugate of the predicted moment exponents, and the formalism report
# ---------------------------------------------------------------------------

def tau_star_closed(model: CascadeModel, rho: float, eta: float,
                    params: PhaseParams, H_grid: np.ndarray) -> SpectrumCurve:
    """Closed-form conjugate of the rho<1 moment exponents (three branches)."""
    if params.case_tag not in (CASE_1, CASE_2A, CASE_2B):
        raise ValueError("closed-form conjugate is for rho < 1")
    d = float(model.d)
    re = rho * eta
    q_rho, H_rho = params.q_rho, params.H_rho
    H = np.asarray(H_grid, dtype=float)
    vals = np.full(H.shape, -np.inf)
    lo_dom = re * model.H_min
    hi_dom = rho * model.H_max
    low = H <= re * H_rho
    midsel = (H > re * H_rho) & (H <= rho * H_rho)
    high = (H > rho * H_rho) & (H <= hi_dom + 1e-12)
    inside = H >= lo_dom - 1e-12
    vals[low & inside] = eta * d * (1.0 - rho) + eta * rho * np.asarray(
        sigma(model, H[low & inside] / re))
    vals[midsel] = q_rho * H[midsel]
    vals[high] = d * (1.0 - rho) + rho * np.asarray(sigma(model, H[high] / rho))
    return SpectrumCurve(H, vals, "conjugate", meta={"closed_form": True})


@dataclass
class FormalismReport:
    """Numeric conjugate of the predicted moment exponents against the
    predicted spectrum, with the agreement set detected at `tol`."""

    H: np.ndarray
    sigma: np.ndarray
    tau_star: np.ndarray
    gap: np.ndarray
    tol: float
    equality_mask: np.ndarray
    predicted_set: FormalismSet
    domain: tuple[float, float]

    def min_gap_outside(self, slack: float = 0.0) -> float:
        """Smallest gap over domain grid points not in the predicted set
        (set membership widened by `slack`)."""
        sel = [i for i, h in enumerate(self.H)
               if self.domain[0] - 1e-12 <= h <= self.domain[1] + 1e-12
               and not self.predicted_set.contains(float(h), slack)]
        if not sel:
            return math.inf
        return float(np.min(self.gap[sel]))

    def max_gap_on_set(self, shrink: float = 0.0) -> float:
        """Largest gap over grid points inside the predicted set (interval
        shrunk by `shrink` at each edge; isolated points always kept)."""
        pts = list(self.predicted_set.points)
        interval = self.predicted_set.interval
        sel = []
        for i, h in enumerate(self.H):
            ok = any(abs(h - p) <= 1e-12 for p in pts)
            if interval is not None:
                ok = ok or (interval[0] + shrink <= h <= interval[1] - shrink)
            if ok:
                sel.append(i)
        if not sel:
            return -math.inf
        return float(np.max(np.abs(self.gap[sel])))


def formalism_report(model: CascadeModel, rho: float, eta: float,
                     params: PhaseParams, H_grid: np.ndarray,
                     tol: float = 1e-3,
                     q_range: tuple[float, float] = CONJ_Q_RANGE,
                     q_step: float = CONJ_Q_STEP) -> FormalismReport:
    """Compare the numeric conjugate of predicted tau with predicted sigma."""
    sig = predicted_sigma(model, rho, eta, params, np.asarray(H_grid, dtype=float))
    grid = sig.abscissae
    qs = np.arange(q_range[0], q_range[1] + q_step / 2, q_step)
    tl = predicted_tau(model, rho, eta, params, qs)
    star = legendre(tl, grid)
    gap = star.values - sig.values
    finite = np.isfinite(sig.values)
    eq = finite & (np.abs(gap) <= tol)
    dom = sig.meta["domain"]
    return FormalismReport(H=grid, sigma=sig.values, tau_star=star.values,
                           gap=np.where(finite, gap, np.inf), tol=tol,
                           equality_mask=eq,
                           predicted_set=formalism_set(model, params),
                           domain=dom)
