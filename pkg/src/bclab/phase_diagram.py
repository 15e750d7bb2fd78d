"""Equilibrium macrostates, the two transition curves and region labels.

The equilibrium macrostates at (beta, K) are the global minimum points of
G_{beta,K} on [-1, 1].  Minimizers are located by a fixed grid scan of G' on
[0, 1] followed by a safeguarded Newton polish, then symmetrized.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .free_energy import (
    ModelParams,
    c2_at_zero,
    free_energy_G,
    free_energy_G_deriv,
    free_energy_G_prime_array,
)

BETA_C = math.log(4.0)
K_C = 3.0 / (2.0 * math.log(4.0))

GRID_STEP = 1e-3
DEFAULT_TOL = 1e-10
CURVE_TOL = 1e-9
NEWTON_MAXITER = 100
NEWTON_GTOL = 1e-13

# Log-spaced points below the first grid node, so minima closer to 0 than
# GRID_STEP are not lost.
_NEAR_ZERO = np.geomspace(1e-9, GRID_STEP, 25)[:-1]
_GRID = np.concatenate([_NEAR_ZERO, np.linspace(GRID_STEP, 1.0, int(round(1.0 / GRID_STEP)))])


class SinglePhaseError(ValueError):
    """Raised when a positive thermodynamic magnetization is requested in the
    single-phase region."""


class SpinodalBracketError(RuntimeError):
    pass


class Region(enum.Enum):
    SINGLE_PHASE = "SinglePhase"
    SECOND_ORDER_CURVE = "SecondOrderCurve"
    TRICRITICAL = "Tricritical"
    FIRST_ORDER_POINT = "FirstOrderPoint"
    PHASE_COEXISTENCE = "PhaseCoexistence"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CriticalData:
    beta_c: float = BETA_C
    k_of_beta_c: float = K_C


@dataclass(frozen=True)
class MinimizerSet:
    points: tuple
    depths: tuple
    tolerance: float
    newton_fallback: bool = False
    stationary: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def magnetization(self) -> float:
        return max(self.points)


# ---------------------------------------------------------------------------
# second-order curve


def second_order_K(beta: float) -> float:
    """K(beta) = (e^beta + 2) / (4 beta), for 0 < beta <= log 4."""
    if not (0.0 < beta <= BETA_C):
        raise ValueError(f"second-order curve needs 0 < beta <= log 4, got {beta!r}")
    return _k_formula(beta)


def second_order_K_via_cgf(beta: float) -> float:
    """The same curve written as 1 / (2 beta c_beta''(0))."""
    return 1.0 / (2.0 * beta * c2_at_zero(beta))


def _k_formula(beta):
    return (math.exp(beta) + 2.0) / (4.0 * beta)


def second_order_K_deriv(beta: float, j: int) -> float:
    """j-th derivative of (e^beta + 2)/(4 beta) in beta.

    The formula is analytic for every beta > 0, so it is also used to the
    right of beta_c where the sequences need K^(j)(beta_c).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if j < 0:
        raise ValueError(f"derivative order must be >= 0, got {j!r}")
    if j == 0:
        return _k_formula(beta)
    # (e^b / b)^(j) = e^b sum_i C(j,i) (-1)^i i! / b^{i+1};  (1/b)^(j) = (-1)^j j! / b^{j+1}
    s = sum(math.comb(j, i) * (-1) ** i * math.factorial(i) / beta ** (i + 1) for i in range(j + 1))
    return 0.25 * math.exp(beta) * s + 0.5 * (-1) ** j * math.factorial(j) / beta ** (j + 1)


# ---------------------------------------------------------------------------
# minimizers


def _newton_polish(p, lo, hi):
    """Root of G' in [lo, hi] where G'(lo) < 0 < G'(hi).

    Newton steps that leave the bracket are replaced by bisection.  Returns
    (x, used_fallback).
    """
    x = 0.5 * (lo + hi)
    fallback = False
    for _ in range(NEWTON_MAXITER):
        g1 = free_energy_G_deriv(p, x, 1)
        if g1 == 0.0:
            return x, fallback
        if g1 < 0:
            lo = x
        else:
            hi = x
        g2 = free_energy_G_deriv(p, x, 2)
        step = g1 / g2 if g2 > 0 else math.inf
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4 * np.finfo(float).eps * abs(x) and abs(g1) <= NEWTON_GTOL:
            return x_new, fallback
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            return x_new, fallback
        x = x_new
    # Newton failed to settle: plain bisection on the remaining bracket
    fallback = True
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if free_energy_G_deriv(p, mid, 1) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), fallback


def interior_minima(p: ModelParams):
    """Polished local minima of G in (0, 1].  Returns (xs, used_fallback)."""
    gp = free_energy_G_prime_array(p, _GRID)
    # a local minimum sits where G' crosses from negative to non-negative
    idx = np.nonzero((gp[:-1] < 0) & (gp[1:] >= 0))[0]
    xs = []
    fallback = False
    for i in idx:
        x, fb = _newton_polish(p, _GRID[i], _GRID[i + 1])
        fallback |= fb
        xs.append(float(x))
    return xs, fallback


def _zero_is_candidate(p):
    g2 = free_energy_G_deriv(p, 0.0, 2)
    if g2 > 0:
        return True
    if g2 < 0:
        return False
    return free_energy_G_deriv(p, 0.0, 4) >= 0


def global_minimizers(p: ModelParams, tol: float = DEFAULT_TOL) -> MinimizerSet:
    """Global minimum points of G_{beta,K} on [-1, 1], up to depth tolerance ``tol``."""
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError(f"tol must be in [1e-14, 1e-6], got {tol!r}")
    xs, fallback = interior_minima(p)
    cands = [0.0] if _zero_is_candidate(p) else []
    cands += xs
    if not cands:
        # only possible when 0 is a strict local max and the scan found nothing
        raise RuntimeError(f"no minimizer found for {p}")
    depths = [free_energy_G(p, x) for x in cands]
    best = min(depths)
    keep = sorted({x for x, d in zip(cands, depths) if d - best <= tol})
    pts = sorted({-x for x in keep if x > 0} | set(keep))
    return MinimizerSet(
        points=tuple(pts),
        depths=tuple(free_energy_G(p, x) for x in pts),
        tolerance=tol,
        newton_fallback=fallback,
        stationary=tuple(xs),
    )


def magnetization(p: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Thermodynamic magnetization m(beta, K), the largest global minimizer."""
    m = global_minimizers(p, tol).magnetization
    if m <= 0.0:
        raise SinglePhaseError(f"no positive phase at beta={p.beta!r}, K={p.kk!r}")
    return m


# ---------------------------------------------------------------------------
# first-order curve


def _phi(beta, kk):
    """Least depth among interior local minima, or None if there is none."""
    xs, _ = interior_minima(ModelParams(beta, kk))
    if not xs:
        return None
    p = ModelParams(beta, kk)
    return min(free_energy_G(p, x) for x in xs)


@functools.lru_cache(maxsize=4096)
def first_order_K1(beta: float, n_scan: int = 200) -> float:
    """K_1(beta) for beta > log 4: the K at which an interior minimum of G
    reaches the depth G(0) = 0.

    K is scanned on [0.7 K(beta), K(beta)] (K(beta) meaning the analytic
    continuation of the second-order formula); the lower end is pushed down
    if the scan starts inside the coexistence region.
    """
    if not beta > BETA_C:
        raise ValueError(f"first-order curve needs beta > log 4, got {beta!r}")
    k_hi = _k_formula(beta)
    frac = 0.7
    while True:
        grid = np.linspace(frac * k_hi, k_hi, n_scan)
        phis = [_phi(beta, k) for k in grid]
        negative = [i for i, v in enumerate(phis) if v is not None and v < 0]
        if not negative:
            raise SpinodalBracketError(
                f"no interior minimum below G(0) for K in [{grid[0]:.6g}, {grid[-1]:.6g}] at beta={beta}"
            )
        i = negative[0]
        if i > 0:
            break
        if frac < 1e-3:
            raise SpinodalBracketError(f"coexistence persists down to K={grid[0]:.3g} at beta={beta}")
        frac *= 0.5
    k_neg = grid[i]
    k_pos = grid[i - 1]
    if phis[i - 1] is None:
        # refine to the spinodal: the smallest K with an interior minimum
        lo, hi = k_pos, k_neg
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _phi(beta, mid) is None:
                lo = mid
            else:
                hi = mid
        v = _phi(beta, hi)
        if v is None or v >= 0:
            k_pos = hi
            if v is not None and v == 0:
                return float(hi)
        else:
            raise SpinodalBracketError(
                f"interior minimum appears already below G(0) near K={hi:.12g} at beta={beta}"
            )
    lo, hi = k_pos, k_neg
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        v = _phi(beta, mid)
        if v is None or v > 0:
            lo = mid
        else:
            hi = mid
        if v is not None and abs(v) <= 1e-12 and hi - lo < 1e-12 * hi:
            break
    # the end with the smaller |phi|
    v_lo, v_hi = _phi(beta, lo), _phi(beta, hi)
    if v_lo is not None and abs(v_lo) < abs(v_hi):
        return float(lo)
    return float(hi)


# ---------------------------------------------------------------------------
# classification


def critical_curve(beta: float) -> float:
    """K(beta) for beta <= log 4 and K_1(beta) beyond."""
    if beta <= BETA_C + CURVE_TOL:
        return _k_formula(min(beta, BETA_C)) if beta <= BETA_C else K_C
    return first_order_K1(beta)


def classify(p: ModelParams, tol: float = DEFAULT_TOL) -> Region:
    """Region label of (beta, K)."""
    beta, kk = p.beta, p.kk
    if abs(beta - BETA_C) <= CURVE_TOL and abs(kk - K_C) <= CURVE_TOL:
        return Region.TRICRITICAL
    if beta <= BETA_C + CURVE_TOL:
        if abs(kk - _k_formula(beta)) <= CURVE_TOL:
            return Region.SECOND_ORDER_CURVE
    elif abs(kk - first_order_K1(beta)) <= CURVE_TOL:
        return Region.FIRST_ORDER_POINT
    n_min = len(global_minimizers(p, tol))
    return Region.SINGLE_PHASE if n_min == 1 else Region.PHASE_COEXISTENCE


def in_coexistence(p: ModelParams) -> bool:
    return classify(p) in (Region.PHASE_COEXISTENCE, Region.FIRST_ORDER_POINT)
